"""Per-snapshot geometric summaries and backward-asymptotic comparators.

The summary of a profile collects the four scalar gauges of the flow (the
waist-to-tip length ell, waist warp h, section area A, tip radius d), a
shortest-closed-geodesic estimate from the symmetric candidates, the maximal
scalar curvature, a cigar-scale estimate from the tip curvature, and the
sign margins of the monitored curvature inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .grid import integrate
from .metric import Kernel, Profile, arc_length

__all__ = [
    "GeoSummary",
    "geometric_summary",
    "girth_estimate",
    "lambda_estimate",
    "asymptotic_gaps",
    "weighted_differences",
]

_THIRD_PI = np.pi / 3.0
_SIXTH_PI = np.pi / 6.0


@dataclass
class GeoSummary:
    """One time-stamped record of the monitored geometry."""

    time: float
    ell: float
    h_waist: float
    area: float
    d_tip: float
    girth_est: float
    girth_candidate: str
    sc_max: float
    k_top_waist: float
    lambda_hat: float
    margins_raw: dict = field(default_factory=dict)
    margins_normalized: dict = field(default_factory=dict)
    margins_temporal_floor: dict = field(default_factory=dict)
    cylinder_gap: float = np.nan
    cigar_gap: float = np.nan
    gap_window: float = np.nan


def girth_estimate(p: Profile, kern: Kernel | None = None):
    """Shortest closed geodesic among the symmetric candidates.

    Candidates: the waist circle (2 pi psi(0)), a tip great circle
    (2 pi phi(pi/2)), and the meridian of the section (4 ell). Returns
    (length, candidate tag); the tag records which candidate realises the
    minimum, since none of this is a certified sweep-out computation.
    """
    _, ell = arc_length(p)
    candidates = {
        "waist_circle": 2.0 * np.pi * p.psi[0],
        "tip_circle": 2.0 * np.pi * p.phi[-1],
        "section_meridian": 4.0 * ell,
    }
    tag = min(candidates, key=candidates.get)
    return candidates[tag], tag


def lambda_estimate(p: Profile, kern: Kernel | None = None) -> float:
    """Cigar-scale estimate 2/sqrt(Sc at the tip).

    A cigar of scale lam has tip scalar curvature 4/lam^2, and in a cigar
    cross flat product limit only the cigar factor contributes there.
    """
    kern = kern or Kernel(p)
    sc_tip = float(kern.scalar_curvature[-1])
    if sc_tip <= 0:
        raise NumericError(f"tip scalar curvature non-positive: {sc_tip}")
    return 2.0 / np.sqrt(sc_tip)


def asymptotic_gaps(p: Profile, window: float, kern: Kernel | None = None):
    """Sup-norm distances to the two backward-limit models.

    cylinder_gap measures, over arc distance `window` from the waist, the
    deviation from the flat product (psi constant = h, phi growing at unit
    rate, zero curvature); cigar_gap measures, over `window` from the tip,
    the deviation of the section warp from a cigar of the estimated scale
    plus flatness of the sphere-block curvature and radius. Both are
    dimensionless; component breakdowns come back in a dict.
    """
    kern = kern or Kernel(p)
    s, ell = arc_length(p)
    if not np.isfinite(ell) or not window < ell / 2:
        raise ConfigError(f"window {window} must be < ell/2 = {ell / 2:.3g}")
    m = kern.main
    h = p.psi[0]
    d = p.phi[-1]

    near = s <= window
    ksum = (
        np.abs(m.k_top) + np.abs(m.k1_perp) + np.abs(m.k2_perp) + np.abs(m.l_sec)
    )
    comp = {
        "cyl_psi": float(np.max(np.abs(p.psi[near] / h - 1.0))),
        "cyl_phi_slope": float(np.max(np.abs(m.phi_s[near] - 1.0))),
        "cyl_curv": float(np.max(ksum[near])) * h * h,
    }
    cylinder_gap = comp["cyl_psi"] + comp["cyl_phi_slope"] + comp["cyl_curv"]

    lam = lambda_estimate(p, kern)
    far = s >= ell - window
    if not np.any(far):
        far = np.zeros_like(s, dtype=bool)
        far[-2:] = True
    mu = ell - s
    model = lam * np.tanh(mu[far] / lam)
    comp.update(
        {
            "cigar_psi": float(np.max(np.abs(p.psi[far] - model))) / lam,
            "cigar_l": float(np.max(np.abs(m.l_sec[far]))) * lam * lam,
            "cigar_phi": float(np.max(np.abs(p.phi[far] / d - 1.0))),
        }
    )
    cigar_gap = comp["cigar_psi"] + comp["cigar_l"] + comp["cigar_phi"]
    return cylinder_gap, cigar_gap, comp


_W_QUINTIC = None


def _weight_coeffs():
    # quintic Hermite on [pi/6, pi/3] matching 1/rho^2 with two derivatives
    global _W_QUINTIC
    if _W_QUINTIC is None:
        a, b = _SIXTH_PI, _THIRD_PI
        rows = []
        vals = []
        for x, ders in ((a, (a**-2, -2 * a**-3, 6 * a**-4)), (b, (1.0, 0.0, 0.0))):
            rows.append([x**k for k in range(6)])
            vals.append(ders[0])
            rows.append([k * x ** (k - 1) if k >= 1 else 0.0 for k in range(6)])
            vals.append(ders[1])
            rows.append(
                [k * (k - 1) * x ** (k - 2) if k >= 2 else 0.0 for k in range(6)]
            )
            vals.append(ders[2])
        _W_QUINTIC = np.linalg.solve(np.array(rows), np.array(vals))
    return _W_QUINTIC


def orbit_weight(rho):
    """Smooth monotone weight: 1/rho^2 below pi/6, 1 above pi/3."""
    rho = np.asarray(rho, dtype=float)
    out = np.ones_like(rho)
    small = rho < _SIXTH_PI
    out[small] = 1.0 / np.maximum(rho[small], 1e-300) ** 2
    mid = (~small) & (rho < _THIRD_PI)
    if np.any(mid):
        c = _weight_coeffs()
        out[mid] = np.polyval(c[::-1], rho[mid])
    return out


def weighted_differences(p: Profile, kern: Kernel | None = None):
    """Orbit-weighted curvature differences X, Y, Z, finite on all nodes.

    X = w(xi)(k_top - k2), Y = w(pi/2 - xi)(k2 - k1), Z = w(xi)(k1 - l),
    with w = 1/rho^2 near its orbit so the quadratic vanishing is divided
    out; the weight uses the grid coordinate, which on a graded mesh is a
    smooth positive reparametrization of the angle.
    """
    kern = kern or Kernel(p)
    xi = p.grid.nodes
    m = kern.main
    w0 = orbit_weight(xi)
    w1 = orbit_weight(np.pi / 2 - xi)
    x = w0 * m.d1
    y = w1 * m.d2
    z = w0 * m.d3
    x[0] = (4.0 * x[1] - x[2]) / 3.0
    y[-1] = (4.0 * y[-2] - y[-3]) / 3.0
    z[0] = (4.0 * z[1] - z[2]) / 3.0
    return x, y, z


def geometric_summary(p: Profile, t: float, order: int = 2,
                      gap_window: float | None = None) -> GeoSummary:
    """All monitored scalars of one snapshot."""
    kern = Kernel(p, order=order)
    s, ell = arc_length(p)
    area = float(4.0 * np.pi * integrate(p.grid, p.psi * p.chi))
    h = float(p.psi[0])
    d = float(p.phi[-1])
    girth, tag = girth_estimate(p)
    sc = kern.scalar_curvature
    try:
        lam = lambda_estimate(p, kern)
    except NumericError:
        lam = np.nan
    if gap_window is None:
        gap_window = min(5.0, 0.4 * ell)
    try:
        cyl, cig, _ = asymptotic_gaps(p, gap_window, kern)
    except (ConfigError, NumericError):
        cyl, cig = np.nan, np.nan
    return GeoSummary(
        time=float(t),
        ell=float(ell),
        h_waist=h,
        area=area,
        d_tip=d,
        girth_est=float(girth),
        girth_candidate=tag,
        sc_max=float(np.max(sc)),
        k_top_waist=float(kern.k_top[0]),
        lambda_hat=float(lam),
        margins_raw=kern.raw_margins(),
        margins_normalized=kern.normalized_margins(),
        cylinder_gap=float(cyl),
        cigar_gap=float(cig),
        gap_window=float(gap_window),
    )
