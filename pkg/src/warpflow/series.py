"""Truncated parity power series at a singular orbit.

Near either orbit every smooth invariant quantity is, in the local distance
variable rho, either even or odd; equivalently it has the form
rho^val * (c0 + c1 rho^2 + c2 rho^4) for a nonnegative integer val. Ratios of
such quantities that look like 0/0 pointwise are perfectly regular as series,
which is how curvature values and curvature differences are produced on the
few nodes nearest each orbit, where plain finite differences lose relative
accuracy to cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

_NTERMS = 3


@dataclass(frozen=True)
class ParitySeries:
    """f(rho) = rho**val * (c[0] + c[1] rho^2 + c[2] rho^4)."""

    val: int
    c: tuple

    @staticmethod
    def make(val, coeffs):
        c = tuple(float(x) for x in coeffs) + (0.0,) * (_NTERMS - len(coeffs))
        return ParitySeries(int(val), c[:_NTERMS])

    @property
    def parity(self):
        return "even" if self.val % 2 == 0 else "odd"

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ParitySeries.make(0, [other])
        lo = min(self.val, other.val)
        if (self.val - other.val) % 2 != 0:
            raise NumericError("cannot add series of opposite parity")
        a = _rebase(self, lo)
        b = _rebase(other, lo)
        return ParitySeries(lo, tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self):
        return ParitySeries(self.val, tuple(-x for x in self.c))

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = ParitySeries.make(0, [other])
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return ParitySeries(self.val, tuple(other * x for x in self.c))
        a, b = self.c, other.c
        c = [0.0] * _NTERMS
        for i in range(_NTERMS):
            for j in range(_NTERMS - i):
                c[i + j] += a[i] * b[j]
        return ParitySeries(self.val + other.val, tuple(c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return ParitySeries(self.val, tuple(x / other for x in self.c))
        if other.c[0] == 0.0:
            raise NumericError("series division by a series with zero lead")
        val = self.val - other.val
        if val < 0:
            raise NumericError(
                "series division would produce a pole; shift the numerator first"
            )
        a, b = self.c, other.c
        q = [0.0] * _NTERMS
        for i in range(_NTERMS):
            acc = a[i]
            for j in range(i):
                acc -= q[j] * b[i - j]
            q[i] = acc / b[0]
        return ParitySeries(val, tuple(q))

    def deriv(self):
        """d/drho. One representable order is lost at each differentiation."""
        v = self.val
        if v == 0:
            return ParitySeries(1, (2.0 * self.c[1], 4.0 * self.c[2], 0.0))
        return ParitySeries(
            v - 1, tuple((v + 2 * j) * self.c[j] for j in range(_NTERMS))
        )

    def shift_down(self):
        """Drop a structurally-zero leading coefficient, gaining rho^2.

        The caller asserts that c[0] vanishes identically (up to roundoff);
        whatever residue is there gets discarded.
        """
        return ParitySeries(self.val + 2, (self.c[1], self.c[2], 0.0))

    def eval(self, rho):
        rho = np.asarray(rho, dtype=float)
        r2 = rho * rho
        poly = self.c[0] + r2 * (self.c[1] + r2 * self.c[2])
        if self.val == 0:
            return poly
        return rho**self.val * poly


def _rebase(s: ParitySeries, val: int):
    shift = (s.val - val) // 2
    c = [0.0] * _NTERMS
    for j in range(_NTERMS - shift):
        c[j + shift] = s.c[j]
    return tuple(c)


def fit_parity_series(rho, samples, parity, constrain_lead=None):
    """Least-squares parity series through boundary samples.

    samples[k] is the value at distance rho[k] from the orbit (rho[0] = 0,
    strictly increasing; spacing may be arbitrary). With constrain_lead the
    leading coefficient is pinned (used to impose the orbit compatibility
    conditions exactly) and only the higher coefficients are fitted.
    """
    f = np.asarray(samples, dtype=float)
    rho = np.asarray(rho, dtype=float)
    m = f.shape[0]
    if m < _NTERMS + 2:
        raise NumericError("not enough samples for a parity-series fit")
    scale = rho[-1]
    x = rho / scale
    val = 0 if parity == "even" else 1
    if val == 1:
        # the rho = 0 sample carries no information for an odd function
        f = f[1:]
        x = x[1:]
        rho = rho[1:]
    powers = [val, val + 2, val + 4]
    cols = [x**p for p in powers]
    if constrain_lead is None:
        a = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(a, f, rcond=None)
        c = [coef[j] / scale ** powers[j] for j in range(_NTERMS)]
    else:
        rhs = f - constrain_lead * rho**val
        a = np.column_stack(cols[1:])
        coef, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        c = [constrain_lead] + [coef[j] / scale ** powers[j + 1] for j in range(2)]
    return ParitySeries(val, tuple(float(v) for v in c))
