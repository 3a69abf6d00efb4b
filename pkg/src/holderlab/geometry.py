"""Intrinsic cylinders, the norms measured on them, and anisotropic rescaling.

A cylinder of radius tau anchored at (x0, t0) with time exponent theta is
the backward set (t0 - tau^theta, t0) x B_tau(x0).  Shrinking tau nests the
cylinders, which makes oscillation ladders monotone by construction.

Four rescaling transformations are provided, each acting as
v(x, t) = amplitude * u(space * x, time * t) with a matching source factor:

* ``POISSON_ZOOM``        u_lam = lam^-(2 - n/p) u(lam x), f_lam = lam^(n/p) f(lam x)
* ``PPOISSON_NORMALIZE``  v = rho u(x, rho^(p-2) t),       f~ = rho^(p-1) f
* ``PME_ZOOM``            v = u(lam^k x, lam^(k theta) t) / lam^(gamma k),
                          f~ = lam^(k (2 - alpha)) f
* ``PME_NORMALIZE``       v = rho u(rho^a x, rho^(m-1+2a) t), f~ = rho^(m+2a) f
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    CylinderOutsideDomain,
    InvalidScaleParameter,
    NonPositiveRadius,
    ScaledDomainEscapes,
    SmallnessSearchFailed,
    UnsupportedKind,
)
from .fields import (
    GridSpec,
    SpaceTimeField,
    _region_cells,
    covered_measure,
    integrate_region,
)

__all__ = [
    "IntrinsicCylinder",
    "make_cylinder",
    "NormValue",
    "sup_oscillation",
    "p_avg_norm",
    "lqr_norm",
    "ScalingKind",
    "AnisotropicScaling",
    "build_scaling",
    "apply_scaling",
    "ScalingNormFactor",
    "scaling_norm_factor",
    "SmallnessResult",
    "pparabolic_smallness",
    "pme_smallness",
    "pme_smallness_exponent",
]

_REL_TOL = 1e-9


@dataclass(frozen=True)
class IntrinsicCylinder:
    """Backward space-time cylinder (t0 - tau^theta, t0) x B_tau(x0)."""

    x0: tuple[float, ...]
    t0: float
    tau: float
    theta: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise NonPositiveRadius(f"cylinder radius must be positive, got {self.tau}")
        if self.theta < 1.0:
            raise InvalidScaleParameter(f"theta must be >= 1, got {self.theta}")

    @property
    def time_extent(self) -> float:
        return self.tau**self.theta

    def time_window(self):
        return (self.t0 - self.time_extent, self.t0)

    def space_bounds(self):
        return tuple((c - self.tau, c + self.tau) for c in self.x0)

    def space_mask(self, *mesh):
        r2 = sum((np.asarray(c) - c0) ** 2 for c, c0 in zip(mesh, self.x0))
        return r2 <= self.tau**2

    def shrunk(self, factor: float) -> "IntrinsicCylinder":
        return IntrinsicCylinder(self.x0, self.t0, self.tau * factor, self.theta)

    def contained_in(self, grid: GridSpec) -> bool:
        for (lo, hi), (blo, bhi) in zip(grid.x_extent, self.space_bounds()):
            tol = _REL_TOL * (hi - lo)
            if blo < lo - tol or bhi > hi + tol:
                return False
        t_lo, t_hi = grid.t_extent
        tol = _REL_TOL * (t_hi - t_lo)
        w_lo, w_hi = self.time_window()
        return w_lo >= t_lo - tol and w_hi <= t_hi + tol


def make_cylinder(center, tau: float, theta: float) -> IntrinsicCylinder:
    """Cylinder from a space-time anchor ``(x[, y], t0)``."""
    *x0, t0 = center
    return IntrinsicCylinder(tuple(float(c) for c in x0), float(t0), float(tau), float(theta))


@dataclass(frozen=True)
class NormValue:
    value: float
    kind: str  # "sup" | "p_avg" | "lqr"
    p: float | None = None
    q: float | None = None
    r: float | None = None


def _node_selection(field: SpaceTimeField, cyl: IntrinsicCylinder):
    g = field.grid
    t_lo, t_hi = cyl.time_window()
    ts = g.t_nodes
    tsel = np.nonzero((ts >= t_lo) & (ts <= t_hi))[0]
    if g.dim == 1:
        xs = g.x_nodes(0)
        xsel = np.nonzero(np.abs(xs - cyl.x0[0]) <= cyl.tau)[0]
        if tsel.size == 0 or xsel.size == 0:
            return None
        return field.values[np.ix_(tsel, xsel)].ravel()
    mesh = np.meshgrid(g.x_nodes(0), g.x_nodes(1), indexing="ij")
    mask = cyl.space_mask(*mesh)
    if tsel.size == 0 or not mask.any():
        return None
    return field.values[tsel][:, mask].ravel()


def sup_oscillation(field: SpaceTimeField, cyl: IntrinsicCylinder):
    """(oscillation, sup of |u|) over the cylinder.

    Extrema are taken over grid nodes inside the cylinder plus the
    interpolated anchor value; with multilinear interpolation the node
    scan bounds the interpolant on every fully contained cell, and the
    O(dx) slack at the curved boundary shrinks with the grid.
    """
    if not cyl.contained_in(field.grid):
        raise CylinderOutsideDomain(f"{cyl} escapes the field domain")
    center_val = float(field.interp(*[np.asarray(c) for c in cyl.x0], np.asarray(cyl.t0)))
    nodes = _node_selection(field, cyl)
    if nodes is None or nodes.size == 0:
        return 0.0, abs(center_val)
    vmax = max(float(nodes.max()), center_val)
    vmin = min(float(nodes.min()), center_val)
    return vmax - vmin, max(abs(vmax), abs(vmin))


def p_avg_norm(field: SpaceTimeField, region, p: float) -> NormValue:
    """Volume-averaged L^p norm (mean of |v|^p over the region)^(1/p).

    Computed as a plain cell average, which agrees with the
    |Q|^(-1/p) ||v||_p route to rounding because both use the same
    midpoint cells.
    """
    if p < 1.0:
        raise ValueError("p must be >= 1")
    flat, _ = _region_cells(field, region)
    if math.isinf(p):
        return NormValue(float(np.abs(flat).max()), "p_avg", p=p)
    mean = float((np.abs(flat) ** p).mean())
    return NormValue(mean ** (1.0 / p), "p_avg", p=p)


def lqr_norm(field: SpaceTimeField, region, q: float, r: float) -> NormValue:
    """Mixed norm: L^q over each spatial slice, then L^r of the slice norms.

    Infinite exponents are essential sups approximated by the grid max.
    """
    if q < 1.0 or r < 1.0:
        raise ValueError("q and r must be >= 1")
    flat, _ = _region_cells(field, region)
    space_vol = field.grid.space_cell_volume
    if math.isinf(q):
        slices = np.abs(flat).max(axis=1)
    else:
        slices = ((np.abs(flat) ** q).sum(axis=1) * space_vol) ** (1.0 / q)
    if math.isinf(r):
        value = float(slices.max())
    else:
        value = float(((slices**r).sum() * field.grid.dt) ** (1.0 / r))
    return NormValue(value, "lqr", q=q, r=r)


# -- anisotropic rescaling ----------------------------------------------------


class ScalingKind(Enum):
    POISSON_ZOOM = "poisson_zoom"
    PPOISSON_NORMALIZE = "ppoisson_normalize"
    PME_ZOOM = "pme_zoom"
    PME_NORMALIZE = "pme_normalize"


@dataclass(frozen=True, eq=False)
class AnisotropicScaling:
    """Space/time/amplitude/source factors of one rescaling.

    Acts on a solution as v(x, t) = amplitude * u(space x, time t) and on
    its source as f~(x, t) = source * f(space x, time t).
    """

    kind: ScalingKind
    space_factor: float
    time_factor: float
    amplitude_factor: float
    source_factor: float
    params: dict

    def __post_init__(self):
        for name in ("space_factor", "time_factor", "amplitude_factor", "source_factor"):
            if not getattr(self, name) > 0.0:
                raise InvalidScaleParameter(f"{name} must be positive")


def _require(cond, msg):
    if not cond:
        raise InvalidScaleParameter(msg)


def build_scaling(kind: ScalingKind, **params) -> AnisotropicScaling:
    """Construct a scaling whose factors satisfy the kind's exact coupling.

    Contraction parameters ``lam`` and ``rho`` live in (0, 1]; the value 1
    yields the identity.
    """
    if kind is ScalingKind.POISSON_ZOOM:
        lam, p_hat, n = params["lam"], params["p_hat"], params["n"]
        _require(0.0 < lam <= 1.0, "lam must lie in (0, 1]")
        _require(p_hat >= 1.0, "p_hat must be >= 1")
        _require(n >= 1, "n must be >= 1")
        return AnisotropicScaling(
            kind, lam, 1.0, lam ** -(2.0 - n / p_hat), lam ** (n / p_hat), dict(params)
        )
    if kind is ScalingKind.PPOISSON_NORMALIZE:
        rho, p = params["rho"], params["p"]
        _require(0.0 < rho <= 1.0, "rho must lie in (0, 1]")
        _require(p >= 2.0, "p must be >= 2")
        return AnisotropicScaling(kind, 1.0, rho ** (p - 2.0), rho, rho ** (p - 1.0), dict(params))
    if kind is ScalingKind.PME_ZOOM:
        lam, k = params["lam"], params.get("k", 1)
        theta, gamma, alpha = params["theta"], params["gamma"], params["alpha"]
        _require(0.0 < lam <= 1.0, "lam must lie in (0, 1]")
        _require(k >= 1 and int(k) == k, "k must be a positive integer")
        _require(theta >= 1.0, "theta must be >= 1")
        _require(gamma > 0.0, "gamma must be positive")
        _require(0.0 < alpha <= 1.0, "alpha must lie in (0, 1]")
        space = lam ** float(k)
        return AnisotropicScaling(
            kind, space, space**theta, space**-gamma, space ** (2.0 - alpha), dict(params)
        )
    if kind is ScalingKind.PME_NORMALIZE:
        rho, a, m = params["rho"], params["a"], params["m"]
        _require(0.0 < rho <= 1.0, "rho must lie in (0, 1]")
        _require(a > 0.0, "a must be positive")
        _require(m >= 1.0, "m must be >= 1")
        return AnisotropicScaling(
            kind, rho**a, rho ** ((m - 1.0) + 2.0 * a), rho, rho ** (m + 2.0 * a), dict(params)
        )
    raise UnsupportedKind(f"unknown scaling kind {kind!r}")


def apply_scaling(
    field: SpaceTimeField,
    sc: AnisotropicScaling,
    grid: GridSpec | None = None,
    role: str = "solution",
) -> SpaceTimeField:
    """Transformed field factor * u(space x, time t) sampled on ``grid``.

    ``role`` selects the amplitude factor ("solution") or the source factor
    ("source").  The default grid is the full preimage of the source
    domain, so the map never escapes; a caller grid is validated and
    ``ScaledDomainEscapes`` is raised if its image leaves the domain.
    """
    if role not in ("solution", "source"):
        raise ValueError("role must be 'solution' or 'source'")
    factor = sc.amplitude_factor if role == "solution" else sc.source_factor
    g_src = field.grid
    if grid is None:
        grid = GridSpec(
            g_src.dim,
            tuple((lo / sc.space_factor, hi / sc.space_factor) for lo, hi in g_src.x_extent),
            g_src.nx,
            (g_src.t_extent[0] / sc.time_factor, g_src.t_extent[1] / sc.time_factor),
            g_src.nt,
        )
    for axis in range(grid.dim):
        lo, hi = grid.x_extent[axis]
        s_lo, s_hi = g_src.x_extent[axis]
        tol = _REL_TOL * (s_hi - s_lo)
        if lo * sc.space_factor < s_lo - tol or hi * sc.space_factor > s_hi + tol:
            raise ScaledDomainEscapes(f"axis {axis} image escapes the source domain")
    s_tlo, s_thi = g_src.t_extent
    tol = _REL_TOL * (s_thi - s_tlo)
    if (grid.t_extent[0] * sc.time_factor < s_tlo - tol
            or grid.t_extent[1] * sc.time_factor > s_thi + tol):
        raise ScaledDomainEscapes("time image escapes the source domain")

    mesh = [np.clip(x * sc.space_factor, g_src.x_extent[a][0], g_src.x_extent[a][1])
            for a, x in enumerate(grid.node_mesh())]
    out = np.empty((grid.nt, *grid.spatial_shape()))
    shape = np.broadcast(*mesh).shape if grid.dim > 1 else mesh[0].shape
    for level, t in enumerate(grid.t_nodes):
        t_mapped = min(max(t * sc.time_factor, s_tlo), s_thi)
        out[level] = field.interp(*mesh, np.full(shape, t_mapped))
    return SpaceTimeField(grid, factor * out, name=field.name,
                          provenance=f"{field.provenance}|{sc.kind.value}")


@dataclass(frozen=True)
class ScalingNormFactor:
    """Predicted prefactor relating the transformed source's mixed norm on
    the unit cylinder to the original norm on the mapped (shrunken) region.

    ``exponent_e`` is reported for the zoom kinds: the decay exponent of the
    r-th power identity, nonnegative exactly when the factor is <= 1 for a
    contraction.  For ``PME_NORMALIZE`` it is the smallness-regime exponent
    (m + 2a) r - a (n r / q + 2) - (m - 1), required positive.
    """

    factor: float
    exponent_e: float | None = None
    exponent_nonnegative: bool | None = None


def scaling_norm_factor(sc: AnisotropicScaling, q: float, r: float, n: int) -> ScalingNormFactor:
    """Exact algebraic norm prefactor F * S^(-n/q) * T^(-1/r)."""
    if not isinstance(sc.kind, ScalingKind):
        raise UnsupportedKind(f"unknown scaling kind {sc.kind!r}")
    iq = 0.0 if math.isinf(q) else 1.0 / q
    ir = 0.0 if math.isinf(r) else 1.0 / r
    factor = (
        sc.source_factor
        * sc.space_factor ** (-n * iq)
        * sc.time_factor ** (-ir)
    )
    if sc.kind is ScalingKind.PME_ZOOM:
        alpha, theta = sc.params["alpha"], sc.params["theta"]
        e_over_r = (2.0 - alpha) - n * iq - theta * ir
        e = e_over_r * r if not math.isinf(r) else (math.inf if e_over_r > 0 else -math.inf if e_over_r < 0 else 0.0)
        return ScalingNormFactor(factor, e, e_over_r >= 0.0)
    if sc.kind is ScalingKind.PME_NORMALIZE:
        e = pme_smallness_exponent(sc.params["m"], sc.params["a"], n, q, r)
        return ScalingNormFactor(factor, e, e > 0.0)
    return ScalingNormFactor(factor)


def pme_smallness_exponent(m: float, a: float, n: int, q: float, r: float) -> float:
    """(m + 2a) r - a (n r / q + 2) - (m - 1); for r = inf, the /r limit."""
    iq = 0.0 if math.isinf(q) else 1.0 / q
    if math.isinf(r):
        return (m + 2.0 * a) - a * n * iq
    return (m + 2.0 * a) * r - a * (n * r * iq + 2.0) - (m - 1.0)


# -- smallness search ---------------------------------------------------------


@dataclass
class SmallnessResult:
    rho: float
    a: int | None
    scaling: AnisotropicScaling
    v: SpaceTimeField
    f_scaled: SpaceTimeField
    v_norm: float
    f_norm: float
    iterations: int


def _unit_cylinder(dim):
    return IntrinsicCylinder((0.0,) * dim, 0.0, 1.0, 2.0)


def _bisect_smallness(make_scaling, u_field, f_field, v_norm_of, q, r, epsilon, max_iter):
    """Largest contraction rho in (0, 1) meeting both norm targets.

    Every candidate is verified by direct norm evaluation on the
    transformed fields; the best feasible one is returned.
    """
    g1 = _unit_cylinder(u_field.grid.dim)
    best = None
    lo, hi = 0.0, 1.0
    for it in range(1, max_iter + 1):
        rho = 0.5 * (lo + hi)
        sc = make_scaling(rho)
        v = apply_scaling(u_field, sc, grid=u_field.grid)
        f_scaled = apply_scaling(f_field, sc, grid=f_field.grid, role="source")
        v_norm = v_norm_of(v, g1)
        f_norm = lqr_norm(f_scaled, g1, q, r).value
        if v_norm <= 1.0 and f_norm <= epsilon:
            best = (rho, sc, v, f_scaled, v_norm, f_norm, it)
            lo = rho
        else:
            hi = rho
    if best is None:
        raise SmallnessSearchFailed(
            f"no rho in (0,1) reached the targets after {max_iter} bisection steps"
        )
    return best


def pparabolic_smallness(
    u_field: SpaceTimeField,
    f_field: SpaceTimeField,
    p: float,
    q: float,
    r: float,
    epsilon: float = 1e-2,
    max_iter: int = 60,
) -> SmallnessResult:
    """Contraction v = rho u(x, rho^(p-2) t) reaching the smallness regime
    ||v||_{p,avg,G1} <= 1 and ||f~||_{q,r;G1} <= epsilon."""
    def v_norm_of(v, g1):
        return p_avg_norm(v, g1, p).value

    rho, sc, v, f_scaled, v_norm, f_norm, it = _bisect_smallness(
        lambda rho: build_scaling(ScalingKind.PPOISSON_NORMALIZE, rho=rho, p=p),
        u_field, f_field, v_norm_of, q, r, epsilon, max_iter,
    )
    return SmallnessResult(rho, None, sc, v, f_scaled, v_norm, f_norm, it)


def pme_smallness(
    u_field: SpaceTimeField,
    f_field: SpaceTimeField,
    m: float,
    q: float,
    r: float,
    epsilon: float = 1e-2,
    max_iter: int = 60,
) -> SmallnessResult:
    """Contraction v = rho u(rho^a x, rho^(m-1+2a) t) with the smallest
    integer a > 0 making the source-norm exponent positive."""
    n = u_field.grid.dim
    a = 1
    while pme_smallness_exponent(m, float(a), n, q, r) <= 0.0:
        a += 1
        if a > 64:
            raise SmallnessSearchFailed("no integer a <= 64 makes the exponent positive")

    def v_norm_of(v, g1):
        return p_avg_norm(v, g1, math.inf).value  # sup norm target

    rho, sc, v, f_scaled, v_norm, f_norm, it = _bisect_smallness(
        lambda rho: build_scaling(ScalingKind.PME_NORMALIZE, rho=rho, a=float(a), m=m),
        u_field, f_field, v_norm_of, q, r, epsilon, max_iter,
    )
    return SmallnessResult(rho, a, sc, v, f_scaled, v_norm, f_norm, it)
