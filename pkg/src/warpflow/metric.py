"""Metric profiles and pointwise geometry of doubly warped products on S^n.

A Profile holds the three warping functions (chi, psi, phi) of an invariant
metric chi^2 dxi^2 + psi^2 dtheta^2 + phi^2 g_{S^{n-2}} sampled on a fixed
grid, with the waist at xi = 0 (phi vanishes) and the tip at xi = pi/2 (psi
vanishes). The curvature operator has at most four distinct eigenvalues,

    k_top   = -psi_ss / psi
    k1_perp = -phi_ss / phi
    k2_perp = -psi_s phi_s / (psi phi)
    l_sec   = (1 - phi_s^2) / phi^2

with s the arc-length parameter (d/ds = chi^{-1} d/dxi). All four extend
continuously to the singular orbits; the raw formulas degenerate to 0/0
there, so the kernel combines three evaluation strategies:

* plain formulas at interior nodes, with first derivatives taken several
  orders above the base scheme (the l_sec numerator 1 - phi_s^2 otherwise
  loses all relative accuracy approaching the waist);
* quotient-chain forms for the eigenvalue differences, e.g.
  k_top - k2_perp = -(phi/psi) d/ds(psi_s/phi), which keep multiplicative
  error structure so the sign of a small difference survives discretization;
* parity-series fits on a few nodes nearest each orbit for quantities whose
  cancellation is quadratic (k1_perp - l_sec near the waist, the
  s-derivative monitors), where pointwise differencing cannot recover the
  sign at any practical resolution.

Monitored sign margins additionally carry per-node noise floors obtained by
re-evaluating every margin array with a second, lower-order discretization:
where the two disagree, the value is truncation-dominated and only a
violation exceeding the disagreement counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DataError, NumericError
from .grid import Grid, d_dr, d2_dr2, cumulative_integral, integrate
from .series import fit_parity_series

__all__ = [
    "Profile",
    "CurvatureField",
    "ValidationReport",
    "validate_smoothness",
    "require_valid",
    "arc_length",
    "sectional_curvatures",
    "ricci_and_scalar",
    "scalar_laplacian",
    "curvature_derivative_identities",
    "Kernel",
]

MARGIN_NAMES = (
    "d1",
    "d2",
    "d3",
    "l_sec",
    "k_top_s",
    "k1_perp_s",
    "k2_perp_s",
    "l_sec_s",
)


@dataclass
class Profile:
    """Warping functions of an invariant metric at one instant."""

    grid: Grid
    chi: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise DataError(f"dimension n must be >= 3, got {self.n}")
        for name in ("chi", "psi", "phi"):
            self.grid.require_shape(getattr(self, name))

    def copy(self):
        return Profile(
            self.grid, self.chi.copy(), self.psi.copy(), self.phi.copy(), self.n
        )

    @property
    def scale(self) -> float:
        return max(
            float(np.max(np.abs(self.chi))),
            float(np.max(np.abs(self.psi))),
            float(np.max(np.abs(self.phi))),
        )


@dataclass
class CurvatureField:
    """Sectional curvature eigenvalues and their arc-length derivatives.

    The s-derivatives of k2_perp and l_sec come from the first-order
    identities (lower noise); those of k_top and k1_perp from differencing
    with a parity-series override near the orbits.
    """

    k_top: np.ndarray
    k1_perp: np.ndarray
    k2_perp: np.ndarray
    l_sec: np.ndarray
    k_top_s: np.ndarray
    k1_perp_s: np.ndarray
    k2_perp_s: np.ndarray
    l_sec_s: np.ndarray


@dataclass
class ValidationReport:
    conditions: list = field(default_factory=list)
    passed: bool = True

    def add(self, name, measured, tol):
        ok = bool(measured <= tol)
        self.conditions.append(
            {"name": name, "measured": float(measured), "tol": float(tol), "ok": ok}
        )
        self.passed = self.passed and ok

    def failing(self):
        return [c for c in self.conditions if not c["ok"]]

    def as_dict(self):
        return {"passed": self.passed, "conditions": self.conditions}


def validate_smoothness(p: Profile, rtol: float = 1e-6) -> ValidationReport:
    """Check positivity, endpoint parity and the orbit compatibility conditions."""
    g = p.grid
    h = g.h
    rep = ValidationReport()
    scale = p.scale
    finite = (
        np.isfinite(p.chi).all()
        and np.isfinite(p.psi).all()
        and np.isfinite(p.phi).all()
    )
    if not finite:
        rep.add("finite-values", np.inf, rtol)
        return rep

    rep.add("chi-positive", max(0.0, (1e-300 - np.min(p.chi)) / scale), rtol)
    rep.add(
        "psi-positive-away-from-tip",
        max(0.0, (1e-300 - np.min(p.psi[:-1])) / scale),
        rtol,
    )
    rep.add("psi-vanishes-at-tip", abs(p.psi[-1]) / scale, rtol)
    rep.add(
        "phi-positive-away-from-waist",
        max(0.0, (1e-300 - np.min(p.phi[1:])) / scale),
        rtol,
    )
    rep.add("phi-vanishes-at-waist", abs(p.phi[0]) / scale, rtol)

    # Parity and compatibility checks run in the physical frame (radius from
    # the orbit) so they are exact on parity polynomials for any admissible
    # mesh map. The orbit slope of an odd function comes from interpolating
    # c1 rho + c3 rho^3 + c5 rho^5 through the three nearest nodes; the odd
    # content of an even function from the slope of a parabola through the
    # nearest three, scaled by the first cell (deviation at grid resolution).
    def odd_slope(rho, f):
        a = np.vander(rho * rho, 3, increasing=True) * rho[:, None]
        return float(np.linalg.solve(a, f)[0])

    def even_defect(rho, f):
        a = np.column_stack([np.ones(3), rho, rho * rho])
        slope = float(np.linalg.solve(a, f)[1])
        return abs(slope) * rho[1]

    r3, u3 = g.r_phys[:4], g.u_phys[::-1][:4]
    mp0, mp1 = g.mprime[0], g.mprime[-1]
    chi_w, chi_t = p.chi[0] / mp0, p.chi[-1] / mp1
    chi_phys = p.chi / g.mprime

    def loc(d):
        return max(float(np.max(np.abs(d))), 1e-300)

    cw, ct = chi_phys[:3], chi_phys[::-1][:3]
    rep.add("chi-even-at-waist", even_defect(r3[:3], cw) / loc(cw), rtol)
    rep.add("chi-even-at-tip", even_defect(u3[:3], ct) / loc(ct), rtol)
    rep.add("psi-even-at-waist", even_defect(r3[:3], p.psi[:3]) / scale, rtol)
    rep.add("phi-even-at-tip", even_defect(u3[:3], p.phi[::-1][:3]) / scale, rtol)

    dphi0 = odd_slope(r3[1:], p.phi[1:4])
    rep.add(
        "waist-compat-dphi-eq-chi",
        abs(dphi0 - chi_w) / max(abs(chi_w), 1e-300),
        rtol,
    )
    dpsi_tip = odd_slope(u3[1:], p.psi[::-1][1:4])
    rep.add(
        "tip-compat-dpsi-eq-minus-chi",
        abs(dpsi_tip - chi_t) / max(abs(chi_t), 1e-300),
        rtol,
    )
    return rep


def require_valid(p: Profile, rtol: float = 1e-6):
    rep = validate_smoothness(p, rtol)
    if not rep.passed:
        names = ", ".join(c["name"] for c in rep.failing())
        raise DataError(f"profile fails smoothness validation: {names}")
    return rep


def arc_length(p: Profile):
    """Arc length s(xi) from the waist and the total half-length ell."""
    s = cumulative_integral(p.grid, p.chi)
    ell = integrate(p.grid, p.chi)
    return s, ell


def _even_end_value(arr, side):
    # quartic-accurate endpoint value of an even-parity grid function
    if side == 0:
        return (4.0 * arr[1] - arr[2]) / 3.0
    return (4.0 * arr[-2] - arr[-3]) / 3.0


class _Pipeline:
    """One complete discretization pass at a given first-derivative order."""

    def __init__(self, p: Profile, order: int, first_order: int, nfit: int, k0: int):
        self.p = p
        self.g = p.grid
        self.order = order
        self.first_order = first_order
        self.nfit = nfit
        self.k0 = k0

    # primitive derivatives

    @cached_property
    def chi_x(self):
        return d_dr(self.g, self.p.chi, "even", "even", order=self.first_order)

    @cached_property
    def psi_x(self):
        return d_dr(self.g, self.p.psi, "even", "odd", order=self.first_order)

    @cached_property
    def phi_x(self):
        return d_dr(self.g, self.p.phi, "odd", "even", order=self.first_order)

    @cached_property
    def psi_s(self):
        return self.psi_x / self.p.chi

    @cached_property
    def phi_s(self):
        return self.phi_x / self.p.chi

    # Second s-derivatives are two staged first derivatives. The alternative
    # chain-rule form (f_xx - f_x chi_x/chi)/chi^2 subtracts two map-scaled
    # terms whose truncation error follows the mesh map rather than the
    # physical signal, which wrecks accuracy on graded meshes wherever the
    # curvature is small.
    @cached_property
    def psi_ss(self):
        d = d_dr(self.g, self.psi_s, "odd", "even", order=self.first_order,
                 rtol=np.inf)
        return d / self.p.chi

    @cached_property
    def phi_ss(self):
        d = d_dr(self.g, self.phi_s, "even", "odd", order=self.first_order,
                 rtol=np.inf)
        return d / self.p.chi

    # parity-series fits at the orbits

    @cached_property
    def waist_series(self):
        return self._orbit_series(0)

    @cached_property
    def tip_series(self):
        return self._orbit_series(1)

    def _orbit_series(self, side):
        # Fits run in the physical frame (radius from the orbit, which on a
        # graded mesh is nonuniform in the node index): the mesh map then
        # never enters the fitted data, so its high-order structure cannot
        # alias into the curvature algebra.
        m = self.nfit + 1
        mp_ = self.g.mprime
        if side == 0:
            rho = self.g.r_phys[:m]
            chi_d = (self.p.chi / mp_)[:m]
            psi_d, phi_d = self.p.psi[:m], self.p.phi[:m]
        else:
            rho = self.g.u_phys[::-1][:m]
            chi_d = (self.p.chi / mp_)[::-1][:m]
            psi_d, phi_d = self.p.psi[::-1][:m], self.p.phi[::-1][:m]
        chi = fit_parity_series(rho, chi_d, "even")
        if side == 0:
            phi = fit_parity_series(rho, phi_d, "odd", constrain_lead=chi.c[0])
            psi = fit_parity_series(rho, psi_d, "even")
        else:
            psi = fit_parity_series(rho, psi_d, "odd", constrain_lead=chi.c[0])
            phi = fit_parity_series(rho, phi_d, "even")

        def d_sigma(f):
            # derivative along the inward arc-length direction
            return f.deriv() / chi

        psi_g = d_sigma(psi)
        phi_g = d_sigma(phi)
        ktop = -(d_sigma(psi_g)) / psi
        k1 = -(d_sigma(phi_g)) / phi
        k2 = -(psi_g * phi_g) / (psi * phi)
        num = 1.0 - phi_g * phi_g
        if side == 0:
            num = num.shift_down()  # lead vanishes exactly by the constraint
        l_sec = num / (phi * phi)
        out = {
            "chi": chi,
            "psi": psi,
            "phi": phi,
            "k_top": ktop,
            "k1_perp": k1,
            "k2_perp": k2,
            "l_sec": l_sec,
            "d1": ktop - k2,
            "d2": k2 - k1,
            "d3": k1 - l_sec,
        }
        # s-derivatives flip sign in the tip frame (s runs outward from the waist)
        sign = 1.0 if side == 0 else -1.0
        for name in ("k_top", "k1_perp", "k2_perp", "l_sec"):
            out[name + "_s"] = sign * d_sigma(out[name])
        return out

    def _patch(self, arr, name, side):
        """Overwrite the k0 nodes nearest an orbit with parity-series values."""
        k0 = self.k0
        if side == 0:
            ser = self.waist_series[name]
            arr[:k0] = ser.eval(self.g.r_phys[:k0])
        else:
            ser = self.tip_series[name]
            arr[-k0:] = ser.eval(self.g.u_phys[-k0:])
        return arr

    # curvature eigenvalue arrays

    @cached_property
    def k_top(self):
        psi = self.p.psi
        out = np.empty_like(psi)
        out[:-1] = -self.psi_ss[:-1] / psi[:-1]
        out[-1] = self.tip_series["k_top"].c[0]
        return out

    @cached_property
    def k1_perp(self):
        phi = self.p.phi
        out = np.empty_like(phi)
        out[1:] = -self.phi_ss[1:] / phi[1:]
        out[0] = self.waist_series["k1_perp"].c[0]
        return out

    @cached_property
    def k2_perp(self):
        out = np.empty_like(self.p.psi)
        num = self.psi_s * self.phi_s
        den = self.p.psi * self.p.phi
        out[1:-1] = -num[1:-1] / den[1:-1]
        # orbit equalities of a smooth metric: k2 = k_top at the waist,
        # k2 = k1 at the tip
        out[0] = self.k_top[0]
        out[-1] = self.k1_perp[-1]
        return out

    @cached_property
    def l_sec(self):
        phi = self.p.phi
        out = np.empty_like(phi)
        num = 1.0 - self.phi_s * self.phi_s
        out[1:] = num[1:] / (phi[1:] * phi[1:])
        out[0] = self.k1_perp[0]  # orbit equality l = k1 at the waist
        return out

    # quotient chains for the eigenvalue differences

    @cached_property
    def u1(self):
        # psi_s / phi: even at both ends; 0/0 at the waist
        out = np.empty_like(self.p.phi)
        out[1:] = self.psi_s[1:] / self.p.phi[1:]
        out[0] = _even_end_value(out, 0)
        return out

    @cached_property
    def v1(self):
        # d/ds(u1) / psi: even, 0/0 at the tip
        du = d_dr(self.g, self.u1, "even", "even",
                  order=self.first_order - 2, rtol=np.inf)
        out = np.empty_like(du)
        out[:-1] = du[:-1] / (self.p.chi[:-1] * self.p.psi[:-1])
        out[-1] = _even_end_value(out, 1)
        return out

    @cached_property
    def u2(self):
        # phi_s / psi: even at both ends; 0/0 at the tip
        out = np.empty_like(self.p.psi)
        out[:-1] = self.phi_s[:-1] / self.p.psi[:-1]
        out[-1] = _even_end_value(out, 1)
        return out

    @cached_property
    def r2(self):
        # d/ds(u2) / phi: even, 0/0 at the waist
        du = d_dr(self.g, self.u2, "even", "even",
                  order=self.first_order - 2, rtol=np.inf)
        out = np.empty_like(du)
        out[1:] = du[1:] / (self.p.chi[1:] * self.p.phi[1:])
        out[0] = _even_end_value(out, 0)
        return out

    @cached_property
    def d1(self):
        # k_top - k2_perp = -(phi/psi) d/ds(psi_s/phi); vanishes at the waist
        return -self.p.phi * self.v1

    @cached_property
    def d2(self):
        # k2_perp - k1_perp = (psi/phi) d/ds(phi_s/psi); vanishes at the tip
        return self.p.psi * self.r2

    @cached_property
    def d3(self):
        # k1_perp - l_sec: no quotient-chain form exists; parity-series patch
        # near the waist where the difference vanishes quadratically
        out = self.k1_perp - self.l_sec
        self._patch(out, "d3", 0)
        out[0] = 0.0
        return out

    # regularized ratios used by monitors and residuals

    @cached_property
    def d1_over_phi2(self):
        # even at the waist; equals -v1/phi
        out = np.empty_like(self.d1)
        phi = self.p.phi
        out[1:] = -self.v1[1:] / phi[1:]
        out[0] = _even_end_value(out, 0)
        return out

    @cached_property
    def d2_over_psi2(self):
        out = np.empty_like(self.d2)
        psi = self.p.psi
        out[:-1] = self.r2[:-1] / psi[:-1]
        out[-1] = _even_end_value(out, 1)
        return out

    @cached_property
    def d3_over_phi(self):
        out = np.empty_like(self.d3)
        phi = self.p.phi
        out[1:] = self.d3[1:] / phi[1:]
        k0 = self.k0
        ser = self.waist_series["d3"].shift_down() / self.waist_series["phi"]
        out[:k0] = ser.eval(self.g.r_phys[:k0])
        return out

    @cached_property
    def d3_over_phi2(self):
        out = np.empty_like(self.d3)
        phi = self.p.phi
        out[1:] = self.d3[1:] / (phi[1:] * phi[1:])
        k0 = self.k0
        phiS = self.waist_series["phi"]
        ser = self.waist_series["d3"].shift_down() / (phiS * phiS)
        out[:k0] = ser.eval(self.g.r_phys[:k0])
        return out

    # s-derivative arrays

    @cached_property
    def k2_perp_s(self):
        # first-order identity: (k2)_s = (phi_s/phi) d1 - (psi_s/psi) d2
        return -self.phi_s * self.v1 - self.psi_s * self.r2

    @cached_property
    def l_sec_s(self):
        # first-order identity: (l)_s = 2 (phi_s/phi) d3
        return 2.0 * self.phi_s * self.d3_over_phi

    @cached_property
    def k_top_s(self):
        out = d_dr(self.g, self.k_top, "even", "even",
                   order=self.first_order - 2, rtol=np.inf) / self.p.chi
        self._patch(out, "k_top_s", 0)
        self._patch(out, "k_top_s", 1)
        return out

    @cached_property
    def k1_perp_s(self):
        out = d_dr(self.g, self.k1_perp, "even", "even",
                   order=self.first_order - 2, rtol=np.inf) / self.p.chi
        self._patch(out, "k1_perp_s", 0)
        self._patch(out, "k1_perp_s", 1)
        return out

    # differenced variants of the identity-based arrays, for residual checks;
    # these difference plain arrays whose orbit values are their own even
    # extensions (the cross-quantity orbit equalities enforced on the public
    # field would look like kinks to a difference stencil)
    @cached_property
    def k2_perp_plain(self):
        out = self.k2_perp.copy()
        out[0] = _even_end_value(out, 0)
        out[-1] = _even_end_value(out, 1)
        return out

    @cached_property
    def l_sec_plain(self):
        out = self.l_sec.copy()
        out[0] = _even_end_value(out, 0)
        return out

    @cached_property
    def k2_perp_s_fd(self):
        return d_dr(self.g, self.k2_perp_plain, "even", "even", order=self.order,
                    rtol=np.inf) / self.p.chi

    @cached_property
    def l_sec_s_fd(self):
        return d_dr(self.g, self.l_sec_plain, "even", "even", order=self.order,
                    rtol=np.inf) / self.p.chi

    def margin_arrays(self):
        return {
            "d1": self.d1,
            "d2": self.d2,
            "d3": self.d3,
            "l_sec": self.l_sec,
            "k_top_s": self.k_top_s,
            "k1_perp_s": self.k1_perp_s,
            "k2_perp_s": self.k2_perp_s,
            "l_sec_s": self.l_sec_s,
        }


class Kernel:
    """Cached geometric quantities of one profile.

    Everything downstream (curvature fields, monitors, evolution residuals)
    pulls from here so all consumers see one consistent discretization. A
    second pipeline at lower first-derivative order provides per-node noise
    floors for the sign monitors.
    """

    _DELEGATED = (
        "chi_x", "psi_x", "phi_x", "psi_s", "phi_s", "psi_ss", "phi_ss",
        "k_top", "k1_perp", "k2_perp", "l_sec",
        "u1", "v1", "u2", "r2", "d1", "d2", "d3",
        "d1_over_phi2", "d2_over_psi2", "d3_over_phi", "d3_over_phi2",
        "k_top_s", "k1_perp_s", "k2_perp_s", "l_sec_s",
        "k2_perp_s_fd", "l_sec_s_fd", "k2_perp_plain", "l_sec_plain",
        "waist_series", "tip_series",
    )

    def __init__(self, p: Profile, order: int = 2):
        self.p = p
        self.g = p.grid
        self.order = order
        n = self.g.node_count
        nfit = min(16, (n - 1) // 3)
        k0 = max(3, min(8, nfit - 2))
        self.main = _Pipeline(p, order, min(order + 4, 6), nfit, k0)
        self.alt = _Pipeline(p, order, min(order + 2, 4), max(8, nfit - 6), k0)
        self.k0 = k0

    def __getattr__(self, name):
        if name in Kernel._DELEGATED:
            return getattr(self.main, name)
        raise AttributeError(name)

    @cached_property
    def field(self) -> CurvatureField:
        m = self.main
        return CurvatureField(
            k_top=m.k_top,
            k1_perp=m.k1_perp,
            k2_perp=m.k2_perp,
            l_sec=m.l_sec,
            k_top_s=m.k_top_s,
            k1_perp_s=m.k1_perp_s,
            k2_perp_s=m.k2_perp_s,
            l_sec_s=m.l_sec_s,
        )

    @cached_property
    def scalar_curvature(self):
        n = self.p.n
        m = self.main
        return (
            2.0 * m.k_top
            + 2.0 * (n - 2) * (m.k1_perp + m.k2_perp)
            + (n - 2) * (n - 3) * m.l_sec
        )

    @cached_property
    def curvature_scale(self):
        """Pointwise curvature magnitude, floored away from exact zero."""
        m = self.main
        s = np.maximum.reduce(
            [np.abs(m.k_top), np.abs(m.k1_perp), np.abs(m.k2_perp), np.abs(m.l_sec)]
        )
        return np.maximum(s, 1e-300)

    @cached_property
    def _roundoff_floors(self):
        """Analytic roundoff amplification per margin array.

        Differencing over-resolved data amplifies representation error by
        1/(h chi) per derivative; regions where a curvature value sits below
        this level are float-invisible and must not trip sign monitors.
        """
        eps = 1.2e-16
        m = self.main
        p, g = self.p, self.g
        hchi = g.h * p.chi

        def loc3(a):
            out = a.copy()
            for s in (1, 2, 3):
                out[s:] = np.maximum(out[s:], a[:-s])
                out[:-s] = np.maximum(out[:-s], a[s:])
            return out

        def pad(a):
            a[0] = a[1]
            a[-1] = a[-2]
            return a

        psi_g = np.maximum(p.psi, 1e-150)
        phi_g = np.maximum(p.phi, 1e-150)
        e1_psi = eps * loc3(np.abs(p.psi)) / hchi
        e1_phi = eps * loc3(np.abs(p.phi)) / hchi
        e2_psi = 3.0 * eps * loc3(np.abs(p.psi)) / (hchi * hchi)
        e2_phi = 3.0 * eps * loc3(np.abs(p.phi)) / (hchi * hchi)

        ro = {}
        ro_ktop = pad(e2_psi / psi_g)
        ro_k1 = pad(e2_phi / phi_g)
        ro_k2 = pad(
            (e1_psi * np.abs(m.phi_s) + e1_phi * np.abs(m.psi_s)) / (psi_g * phi_g)
        )
        ro_l = pad(
            (2.0 * np.abs(m.phi_s) * e1_phi + eps * (1.0 + m.phi_s**2))
            / (phi_g * phi_g)
        )
        ro_u1 = pad(e1_psi / phi_g) + eps * loc3(np.abs(m.u1))
        ro_v1 = pad((2.0 * loc3(ro_u1)) / (hchi * psi_g))
        ro_u2 = pad(e1_phi / psi_g) + eps * loc3(np.abs(m.u2))
        ro_r2 = pad((2.0 * loc3(ro_u2)) / (hchi * phi_g))
        ro["d1"] = p.phi * ro_v1
        ro["d2"] = p.psi * ro_r2
        ro["d3"] = ro_k1 + ro_l
        ro["l_sec"] = ro_l
        ro["k_top_s"] = pad(2.0 * loc3(ro_ktop) / hchi) + eps * loc3(np.abs(m.k_top)) / hchi
        ro["k1_perp_s"] = pad(2.0 * loc3(ro_k1) / hchi) + eps * loc3(np.abs(m.k1_perp)) / hchi
        ro["k2_perp_s"] = np.abs(m.phi_s) * ro_v1 + np.abs(m.psi_s) * ro_r2
        ro["l_sec_s"] = 2.0 * (
            np.abs(m.phi_s) * pad(ro["d3"] / phi_g)
            + e1_phi * np.abs(m.d3_over_phi)
        )
        self._ro_curvature = ro_ktop + ro_k1 + ro_k2 + ro_l
        return ro

    @cached_property
    def margin_floors(self):
        """Per-node truncation/roundoff floors for each margin array.

        The floor combines the disagreement between the two discretization
        pipelines (a Richardson-style truncation estimate) with an analytic
        roundoff-amplification model; a monitored inequality only counts as
        violated where it dips below minus this floor.
        """
        eps = 3e-14
        main = self.main.margin_arrays()
        alt = self.alt.margin_arrays()
        ro = self._roundoff_floors
        floors = {}
        for name in MARGIN_NAMES:
            a, b = main[name], alt[name]
            ref = np.max(np.abs(a)) + 1e-300
            floors[name] = 2.5 * np.abs(a - b) + ro[name] + eps * ref
        return floors

    def normalized_margins(self):
        """Noise-aware normalized sign margins, one scalar per monitor.

        For each monitored array D the value is min over nodes of
        (D + floor) / scale, with scale the local curvature magnitude (to
        the 3/2 power for the s-derivative monitors, which carry an extra
        1/length). Nonnegative margins mean the inequality holds within
        discretization noise.
        """
        main = self.main.margin_arrays()
        floors = self.margin_floors
        s1 = self.curvature_scale
        s32 = s1**1.5
        out = {}
        for name in MARGIN_NAMES:
            scale = s32 if name.endswith("_s") else s1
            vals = (main[name] + floors[name]) / scale
            out[name] = float(np.min(vals))
        return out

    def raw_margins(self):
        main = self.main.margin_arrays()
        return {name: float(np.min(main[name])) for name in MARGIN_NAMES}

    def laplacian_even(self, f):
        """Laplace-Beltrami of an even/even scalar, regular at both orbits."""
        m = self.main
        g, chi = self.g, self.p.chi
        f_x = d_dr(g, f, "even", "even", order=self.order, rtol=np.inf)
        f_s = f_x / chi
        f_ss = d_dr(g, f_s, "odd", "odd", order=self.order, rtol=np.inf) / chi
        q_t = np.empty_like(f)
        q_t[:-1] = f_s[:-1] / self.p.psi[:-1]
        q_t[-1] = _even_end_value(q_t, 1)
        q_w = np.empty_like(f)
        q_w[1:] = f_s[1:] / self.p.phi[1:]
        q_w[0] = _even_end_value(q_w, 0)
        return f_ss + m.psi_s * q_t + (self.p.n - 2) * m.phi_s * q_w


def sectional_curvatures(p: Profile, order: int = 2) -> CurvatureField:
    """Sectional curvature eigenvalues and s-derivatives of a valid profile."""
    kern = Kernel(p, order=order)
    fld = kern.field
    for name in ("k_top", "k1_perp", "k2_perp", "l_sec"):
        arr = getattr(fld, name)
        if not np.isfinite(arr).all():
            idx = int(np.argwhere(~np.isfinite(arr))[0])
            raise NumericError(f"{name} not finite at node {idx}")
    return fld


def ricci_and_scalar(p: Profile, order: int = 2):
    """Ricci eigenvalues (radial, circle, sphere block) and scalar curvature."""
    kern = Kernel(p, order=order)
    n = p.n
    rc_rad = kern.k_top + (n - 2) * kern.k1_perp
    rc_circ = kern.k_top + (n - 2) * kern.k2_perp
    rc_sph = kern.k1_perp + kern.k2_perp + (n - 3) * kern.l_sec
    scal = rc_rad + rc_circ + (n - 2) * rc_sph
    return rc_rad, rc_circ, rc_sph, scal


def scalar_laplacian(p: Profile, f, parity_at_0, parity_at_half_pi, order=2):
    """Laplace-Beltrami operator on an invariant scalar.

    At an orbit where f is even the drift term has a finite limit which is
    resolved exactly (the waist contributes n-2 extra copies of f_ss, the
    tip one). Where f is odd the true Laplacian is generically unbounded at
    that orbit; interior values are returned as-is and the orbit node is set
    to the odd-parity limit 0.
    """
    kern = Kernel(p, order=order)
    m = kern.main
    g, chi = p.grid, p.chi
    f = np.asarray(f, dtype=float)
    g.require_shape(f)
    flip = {"even": "odd", "odd": "even"}
    f_x = d_dr(g, f, parity_at_0, parity_at_half_pi, order=order)
    f_s = f_x / chi
    f_ss = d_dr(g, f_s, flip[parity_at_0], flip[parity_at_half_pi],
                order=order, rtol=np.inf) / chi
    out = f_ss.copy()

    if parity_at_half_pi == "even":
        q = np.empty_like(f)
        q[:-1] = f_s[:-1] / p.psi[:-1]
        q[-1] = _even_end_value(q, 1)
        out += m.psi_s * q
    else:
        term = np.zeros_like(f)
        term[:-1] = m.psi_s[:-1] / p.psi[:-1] * f_s[:-1]
        out += term

    if parity_at_0 == "even":
        q = np.empty_like(f)
        q[1:] = f_s[1:] / p.phi[1:]
        q[0] = _even_end_value(q, 0)
        out += (p.n - 2) * m.phi_s * q
    else:
        term = np.zeros_like(f)
        term[1:] = (p.n - 2) * m.phi_s[1:] / p.phi[1:] * f_s[1:]
        out += term

    if parity_at_0 == "odd":
        out[0] = 0.0
    if parity_at_half_pi == "odd":
        out[-1] = 0.0
    return out


def curvature_derivative_identities(c: CurvatureField, p: Profile, order: int = 2):
    """Residuals of the first-order curvature identities.

    The identities are checked in orbit-weighted form (multiplied through by
    the vanishing warp) so the comparison stays uniformly second-order up to
    the singular orbits:

        phi * dl/ds      vs  2 phi_s (k1_perp - l_sec)
        phi psi * dk2/ds vs  phi_s psi d1 - psi_s phi d2

    Residuals are max-norms over interior nodes, normalized by the profile's
    curvature scale so the pass threshold is a pure resolution statement.
    """
    kern = Kernel(p, order=order)
    m = kern.main
    phi, psi = p.phi, p.psi
    sl = slice(1, -1)
    res_l = np.abs(phi * m.l_sec_s_fd - 2.0 * m.phi_s * m.d3)
    res_k2 = np.abs(
        phi * psi * m.k2_perp_s_fd - (m.phi_s * psi * m.d1 - m.psi_s * phi * m.d2)
    )
    kmax = float(np.max(kern.curvature_scale))
    lscale = max(float(np.max(phi)), float(np.max(psi)))
    scale = max(kmax**1.5 * lscale, 1e-300)
    r_l = float(np.max(res_l[sl])) / scale
    r_k2 = float(np.max(res_k2[sl])) / scale
    tol = 30.0 * p.grid.h**2
    return {
        "k2_perp_s": r_k2,
        "l_sec_s": r_l,
        "tol": tol,
        "passed": bool(r_k2 <= tol and r_l <= tol),
    }
