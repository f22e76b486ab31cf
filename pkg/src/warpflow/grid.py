"""Spatial mesh on [0, pi/2] with parity-aware finite differences and quadrature.

The flow works in a fixed computational coordinate xi in [0, pi/2], uniformly
spaced. A graded mesh is realized through a smooth odd-symmetric map r(xi)
whose derivative m'(xi) concentrates resolution at both singular orbits; the
map is absorbed into the radial metric coefficient by the generators, so every
operator here acts on the uniform xi grid. Each evolved function has a
declared parity (even/odd) at xi = 0 (waist) and xi = pi/2 (tip), and ghost
nodes are produced by the matching reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

HALF_PI = np.pi / 2.0

MIN_NODE_COUNT = 16

# Parity of the three warping functions at (waist, tip). A smooth invariant
# metric forces chi even/even, psi even/odd and phi odd/even.
PARITY_TABLE = {
    "chi": ("even", "even"),
    "psi": ("even", "odd"),
    "phi": ("odd", "even"),
}

# 12-point Gauss-Legendre rule on [-1, 1], used to integrate the mesh map.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class MeshSpec:
    """Mesh descriptor: 'uniform', or 'graded' with per-orbit strengths.

    The physical cell size shrinks by roughly exp(-beta_waist) approaching
    the waist and exp(-beta_tip) approaching the tip, relative to the
    mid-interval cells.
    """

    kind: str = "uniform"
    beta_waist: float = 0.0
    beta_tip: float = 0.0

    def as_dict(self):
        return {
            "kind": self.kind,
            "beta_waist": self.beta_waist,
            "beta_tip": self.beta_tip,
        }

    @staticmethod
    def from_dict(d):
        return MeshSpec(
            kind=d["kind"],
            beta_waist=float(d["beta_waist"]),
            beta_tip=float(d["beta_tip"]),
        )


@dataclass
class Grid:
    """Fixed mesh on [0, pi/2].

    nodes is the computational coordinate; r_phys/u_phys give the physical
    angle r(xi) and its distance pi/2 - r(xi) from the tip (kept separately so
    deeply graded meshes stay meaningful near the tip), and mprime is dr/dxi.
    On a uniform mesh nodes == r_phys and mprime == 1.
    """

    node_count: int
    h: float
    nodes: np.ndarray
    r_phys: np.ndarray
    u_phys: np.ndarray
    mprime: np.ndarray
    mesh: MeshSpec
    parity_table: dict = field(default_factory=lambda: dict(PARITY_TABLE))

    def __post_init__(self):
        if self.node_count < MIN_NODE_COUNT:
            raise ConfigError(
                f"node_count must be >= {MIN_NODE_COUNT}, got {self.node_count}"
            )
        if self.nodes.shape != (self.node_count,):
            raise DataError("node array shape inconsistent with node_count")
        if not (self.nodes[0] == 0.0 and abs(self.nodes[-1] - HALF_PI) < 1e-15):
            raise DataError("nodes must span [0, pi/2]")
        if np.any(np.diff(self.nodes) <= 0):
            raise DataError("nodes must be strictly increasing")

    def require_shape(self, f: np.ndarray):
        if f.shape != (self.node_count,):
            raise DataError(
                f"expected {self.node_count} samples, got shape {f.shape}"
            )


def _mesh_density(beta_waist: float, beta_tip: float, xi: np.ndarray) -> np.ndarray:
    # Cell-size profile exp(-bw S(1-w) - bt S(w)) with w = sin^2 xi and S the
    # cubic smoothstep: ~exp(-beta) cells at each orbit, O(1) mid-interval.
    # A function of cos 2xi alone is even about xi = 0 and xi = pi/2, so the
    # map integral is odd about both ends and parity survives grading.
    w = np.sin(xi) ** 2
    sw = w * w * (3.0 - 2.0 * w)
    swc = (1.0 - w) ** 2 * (1.0 + 2.0 * w)
    return np.exp(-beta_waist * swc - beta_tip * sw)


def _map_interval_integrals(beta_waist, beta_tip, xi: np.ndarray) -> np.ndarray:
    a, b = xi[:-1], xi[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    pts = mid + half * _GL_X[None, :]
    vals = _mesh_density(beta_waist, beta_tip, pts)
    return (vals * _GL_W[None, :]).sum(axis=1) * half[:, 0]


def _build_graded(node_count: int, beta_waist: float, beta_tip: float):
    xi = np.linspace(0.0, HALF_PI, node_count)
    cells = _map_interval_integrals(beta_waist, beta_tip, xi)
    total = cells.sum()
    c = HALF_PI / total
    r = np.concatenate([[0.0], np.cumsum(cells)]) * c
    r[-1] = HALF_PI
    # distance to the tip accumulated from the tip side (no cancellation)
    u = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) * c
    u[0] = HALF_PI
    mprime = c * _mesh_density(beta_waist, beta_tip, xi)
    return xi, r, u, mprime


def make_uniform_grid(node_count: int) -> Grid:
    """Uniform mesh including both endpoints."""
    if node_count < MIN_NODE_COUNT:
        raise ConfigError(
            f"node_count must be >= {MIN_NODE_COUNT}, got {node_count}"
        )
    xi = np.linspace(0.0, HALF_PI, node_count)
    h = HALF_PI / (node_count - 1)
    return Grid(
        node_count=node_count,
        h=h,
        nodes=xi,
        r_phys=xi.copy(),
        u_phys=h * np.arange(node_count - 1, -1, -1, dtype=float),
        mprime=np.ones(node_count),
        mesh=MeshSpec(),
    )


def make_graded_grid(node_count: int, beta_waist: float, beta_tip: float) -> Grid:
    """Mesh graded toward one or both singular orbits.

    The grading strengths are capped so the map itself stays resolved
    (neighbouring cells may not differ by more than ~35%).
    """
    if node_count < MIN_NODE_COUNT:
        raise ConfigError(
            f"node_count must be >= {MIN_NODE_COUNT}, got {node_count}"
        )
    if beta_waist < 0 or beta_tip < 0:
        raise ConfigError("grading strengths must be >= 0")
    h = HALF_PI / (node_count - 1)
    bmax = max(beta_waist, beta_tip)
    if 1.5 * bmax * h > 0.35:
        raise ConfigError(
            f"grading beta={bmax:.1f} too strong for node_count={node_count}; "
            f"increase node_count"
        )
    if bmax == 0.0:
        return make_uniform_grid(node_count)
    xi, r, u, mprime = _build_graded(node_count, beta_waist, beta_tip)
    return Grid(
        node_count=node_count,
        h=h,
        nodes=xi,
        r_phys=r,
        u_phys=u,
        mprime=mprime,
        mesh=MeshSpec(kind="graded", beta_waist=beta_waist, beta_tip=beta_tip),
    )


def grading_for_feature(node_count: int, feature_scale: float) -> float:
    """Smallest grading strength that resolves a boundary feature scale.

    Targets ~48 cells per feature width at the orbits: the orbit-local
    polynomial fits of the curvature kernel and the one-sided compatibility
    estimators of the validator need their stencils well inside one feature.
    Returns 0 when the uniform mesh already suffices. Raises ConfigError when
    no admissible grading reaches the requested scale at this node count.
    """
    if feature_scale <= 0:
        raise ConfigError("feature_scale must be positive")
    h = HALF_PI / (node_count - 1)
    target = feature_scale / 48.0
    if h <= target:
        return 0.0
    beta_max = 0.35 / (1.5 * h)
    xi = np.linspace(0.0, HALF_PI, node_count)

    def tip_cell(beta):
        cells = _map_interval_integrals(0.0, beta, xi)
        return HALF_PI * cells[-1] / cells.sum()

    if tip_cell(beta_max) > target:
        raise ConfigError(
            f"node_count={node_count} cannot resolve feature scale "
            f"{feature_scale:.3e}; increase node_count"
        )
    lo, hi = 0.0, beta_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tip_cell(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


_SIGN = {"even": 1.0, "odd": -1.0}


def _check_parity(f, parity_at_0, parity_at_half_pi, rtol):
    if rtol == np.inf:
        return
    scale = float(np.max(np.abs(f))) or 1.0
    if parity_at_0 == "odd" and abs(f[0]) > rtol * scale:
        raise DataError(
            f"function declared odd at 0 but |f(0)|={abs(f[0]):.3e} "
            f"exceeds {rtol:.1e} * scale"
        )
    if parity_at_half_pi == "odd" and abs(f[-1]) > rtol * scale:
        raise DataError(
            f"function declared odd at pi/2 but |f(pi/2)|={abs(f[-1]):.3e} "
            f"exceeds {rtol:.1e} * scale"
        )


def extend_with_parity(f, parity_at_0, parity_at_half_pi, layers=3):
    """Append ghost layers on both sides by parity reflection."""
    s0 = _SIGN[parity_at_0]
    s1 = _SIGN[parity_at_half_pi]
    left = s0 * f[layers:0:-1]
    right = s1 * f[-2 : -2 - layers : -1]
    return np.concatenate([left, f, right])


def d_dr(grid, f, parity_at_0, parity_at_half_pi, order=2, rtol=1e-6):
    """Derivative of a node-sampled function with parity ghost nodes."""
    grid.require_shape(f)
    _check_parity(f, parity_at_0, parity_at_half_pi, rtol)
    n, h = grid.node_count, grid.h
    a = extend_with_parity(f, parity_at_0, parity_at_half_pi)
    if order == 2:
        out = (a[4 : 4 + n] - a[2 : 2 + n]) / (2.0 * h)
    elif order == 4:
        out = (-a[5 : 5 + n] + 8 * a[4 : 4 + n] - 8 * a[2 : 2 + n] + a[1 : 1 + n]) / (
            12.0 * h
        )
    elif order == 6:
        out = (
            a[6 : 6 + n]
            - 9 * a[5 : 5 + n]
            + 45 * a[4 : 4 + n]
            - 45 * a[2 : 2 + n]
            + 9 * a[1 : 1 + n]
            - a[0:n]
        ) / (60.0 * h)
    else:
        raise ConfigError(f"unsupported derivative order {order}")
    # reflection makes the derivative of an even end exactly zero
    if parity_at_0 == "even":
        out[0] = 0.0
    if parity_at_half_pi == "even":
        out[-1] = 0.0
    return out


def d2_dr2(grid, f, parity_at_0, parity_at_half_pi, order=2, rtol=1e-6):
    """Second derivative with parity ghost nodes."""
    grid.require_shape(f)
    _check_parity(f, parity_at_0, parity_at_half_pi, rtol)
    n, h = grid.node_count, grid.h
    a = extend_with_parity(f, parity_at_0, parity_at_half_pi)
    if order == 2:
        out = (a[4 : 4 + n] - 2 * a[3 : 3 + n] + a[2 : 2 + n]) / (h * h)
    elif order == 4:
        out = (
            -a[5 : 5 + n]
            + 16 * a[4 : 4 + n]
            - 30 * a[3 : 3 + n]
            + 16 * a[2 : 2 + n]
            - a[1 : 1 + n]
        ) / (12.0 * h * h)
    else:
        raise ConfigError(f"unsupported derivative order {order}")
    if parity_at_0 == "odd":
        out[0] = 0.0
    if parity_at_half_pi == "odd":
        out[-1] = 0.0
    return out


def integrate(grid, f) -> float:
    """Quadrature of int_0^{pi/2} f dxi, exact for cubics (composite Simpson)."""
    grid.require_shape(f)
    n, h = grid.node_count, grid.h
    if n % 2 == 1:
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float(np.dot(w, f) * h / 3.0)
    # even node count: Simpson on the first n-3 intervals, 3/8 rule on the rest
    head = integrate_simpson(f[: n - 3], h)
    tail = (f[-4] + 3 * f[-3] + 3 * f[-2] + f[-1]) * 3.0 * h / 8.0
    return head + tail


def integrate_simpson(f, h) -> float:
    n = f.shape[0]
    if n % 2 == 0:
        raise DataError("Simpson segment needs an odd sample count")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.dot(w, f) * h / 3.0)


def cumulative_integral(grid, f) -> np.ndarray:
    """Cumulative integral with second-order (trapezoid + midpoint) accuracy.

    Used for arc length s(xi); the total matches integrate() to O(h^2).
    """
    grid.require_shape(f)
    h = grid.h
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * h)
    return out
