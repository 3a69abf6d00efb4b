"""Empirical regularity measurement on intrinsic cylinder ladders.

The ladder at a center point measures, for radii base * lam^k, the
oscillation, the sup of |u|, and the averaged distance to the best
constant; log-log regression of any of these against the radius estimates
a Holder exponent.  Levels whose cylinder falls under the grid resolution
are truncated, and the default fit window additionally drops the base
level (boundary-polluted) and radii under 8 dx (grid-polluted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroLevels,
    CutoffNotCompact,
    EmptyIntersection,
    InsufficientLevels,
)
from .fields import SourceTerm, SpaceTimeField, _region_cells
from .geometry import IntrinsicCylinder, lqr_norm, make_cylinder, sup_oscillation

__all__ = [
    "ProfileLevel",
    "OscillationProfile",
    "oscillation_profile",
    "HolderFit",
    "fit_exponent",
    "CampanatoReport",
    "campanato_sequence",
    "GeometricIterationReport",
    "geometric_iteration_check",
    "CaccioppoliReport",
    "caccioppoli_check",
    "time_direction_oscillations",
]

ZERO_FLOOR = 1e-14


@dataclass(frozen=True)
class ProfileLevel:
    k: int
    radius: float
    osc: float
    sup_abs: float
    campanato: float
    c_k: float


@dataclass(frozen=True)
class OscillationProfile:
    center: tuple
    theta: float
    lam: float
    k_max: int
    base_radius: float
    p: float
    levels: tuple[ProfileLevel, ...]
    grid_dx: float
    grid_dt: float

    @property
    def k_max_effective(self) -> int:
        return self.levels[-1].k

    def radii(self) -> np.ndarray:
        return np.array([lv.radius for lv in self.levels])

    def series(self, quantity: str) -> np.ndarray:
        try:
            return np.array([getattr(lv, _QUANTITY_FIELD[quantity]) for lv in self.levels])
        except KeyError:
            raise ValueError(f"unknown quantity {quantity!r}; one of {sorted(_QUANTITY_FIELD)}") from None


_QUANTITY_FIELD = {"osc": "osc", "sup_abs": "sup_abs", "campanato": "campanato"}


def _golden_best_constant(vals: np.ndarray, p: float, iters: int = 80):
    """Constant minimizing the averaged |v - c|^p distance, by golden section.

    The objective is convex in c, so the bracket [min v, max v] always
    contains the minimizer.
    """
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-15:
        return 0.5 * (lo + hi), 0.0

    def h(c):
        return float((np.abs(vals - c) ** p).mean())

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    h1, h2 = h(c1), h(c2)
    for _ in range(iters):
        if h1 <= h2:
            b, c2, h2 = c2, c1, h1
            c1 = b - invphi * (b - a)
            h1 = h(c1)
        else:
            a, c1, h1 = c1, c2, h2
            c2 = a + invphi * (b - a)
            h2 = h(c2)
    c = 0.5 * (a + b)
    return c, h(c) ** (1.0 / p)


def oscillation_profile(
    field: SpaceTimeField,
    center,
    theta: float,
    lam: float,
    k_max: int,
    p: float = 2.0,
    base_radius: float = 0.5,
) -> OscillationProfile:
    """Ladder of nested cylinders with oscillation and Campanato data.

    Parameters
    ----------
    field : SpaceTimeField
    center : tuple
        Space-time anchor (x[, y], t0); the base cylinder must sit inside
        the field domain.
    theta : float
        Intrinsic time exponent of the cylinders.
    lam : float
        Radius contraction per level, in (0, 1/2].
    k_max : int
        Deepest requested level; the profile truncates earlier if a
        cylinder falls below one grid cell.
    p : float
        Exponent of the averaged distance to the best constant.
    base_radius : float
    """
    if not 0.0 < lam <= 0.5:
        raise ValueError(f"lam must lie in (0, 1/2], got {lam}")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    g = field.grid
    dx_max = max(g.dx)
    levels = []
    for k in range(k_max + 1):
        tau = base_radius * lam**k
        cyl = make_cylinder(center, tau, theta)
        if k > 0 and (tau < dx_max or cyl.time_extent < g.dt):
            break  # degenerate level: cylinder under one grid cell
        osc, sup_abs = sup_oscillation(field, cyl)
        try:
            vals, _ = _region_cells(field, cyl)
        except EmptyIntersection:
            if k == 0:
                raise
            break
        c_k, dist = _golden_best_constant(vals.ravel(), p)
        levels.append(ProfileLevel(k, tau, osc, sup_abs, dist, c_k))
    return OscillationProfile(
        tuple(center), theta, lam, k_max, base_radius, p, tuple(levels), dx_max, g.dt
    )


@dataclass(frozen=True)
class HolderFit:
    exponent: float
    log_constant: float
    r_squared: float
    window: tuple[int, int]
    n_excluded_zero: int = 0


def _loglog_fit(radii, values, window, n_excluded):
    logs_r = np.log(radii)
    logs_v = np.log(values)
    slope, intercept = np.polyfit(logs_r, logs_v, 1)
    pred = slope * logs_r + intercept
    ss_res = float(((logs_v - pred) ** 2).sum())
    ss_tot = float(((logs_v - logs_v.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return HolderFit(float(slope), float(intercept), r2, window, n_excluded)


def default_fit_window(profile: OscillationProfile) -> tuple[int, int]:
    """Drop the boundary-polluted base level and radii under 8 dx."""
    ks = [lv.k for lv in profile.levels if lv.radius >= 8.0 * profile.grid_dx]
    k_hi = ks[-1] if ks else profile.levels[-1].k
    return (min(1, profile.k_max_effective), k_hi)


def fit_exponent(
    profile: OscillationProfile,
    window: tuple[int, int] | None = None,
    quantity: str = "osc",
) -> HolderFit:
    """Least-squares slope of log(quantity) against log(radius).

    Levels with values under 1e-14 are excluded (their count is recorded);
    at least three usable levels are required.
    """
    if window is None:
        window = default_fit_window(profile)
    k_lo, k_hi = window
    sel = [lv for lv in profile.levels if k_lo <= lv.k <= k_hi]
    radii = np.array([lv.radius for lv in sel])
    vals = profile.series(quantity)[[lv.k for lv in sel]] if sel else np.array([])
    keep = vals > ZERO_FLOOR
    n_excluded = int((~keep).sum())
    if sel and not keep.any():
        raise AllZeroLevels("every level in the window is numerically zero")
    radii, vals = radii[keep], vals[keep]
    if radii.size < 3:
        raise InsufficientLevels(
            f"need at least 3 usable levels in window {window}, have {radii.size}"
        )
    return _loglog_fit(radii, vals, window, n_excluded)


@dataclass(frozen=True)
class CampanatoReport:
    """Best-constant sequence diagnostics on a profile ladder."""

    diffs: tuple[float, ...]          # |c_k - c_{k+1}|
    c_limit: float                    # deepest available constant
    decay: HolderFit | None           # geometric decay rate of the diffs
    degenerate: bool                  # all diffs at the zero floor
    distance_bounds: tuple[float, ...]  # ||u - c_limit|| upper bounds per level
    constant: float | None            # smallest C with bound_k <= C r_k^rate
    inequality_holds: bool | None


def campanato_sequence(profile: OscillationProfile) -> CampanatoReport:
    """Decay of the best-constant sequence and the limit-constant bound.

    The distance to the limit constant is bounded per level by the
    triangle inequality (measured distance to c_k plus |c_k - c_limit|),
    which only uses data already recorded on the ladder.
    """
    if len(profile.levels) < 4:
        raise InsufficientLevels("campanato sequence needs at least 4 levels")
    cs = np.array([lv.c_k for lv in profile.levels])
    radii = profile.radii()
    diffs = np.abs(np.diff(cs))
    c_limit = float(cs[-1])
    keep = diffs > ZERO_FLOOR
    degenerate = not keep.any()
    decay = None
    if not degenerate:
        if keep.sum() >= 3:
            decay = _loglog_fit(radii[:-1][keep], diffs[keep],
                                (profile.levels[0].k, profile.levels[-2].k),
                                int((~keep).sum()))
        else:
            degenerate = True
    dist_bounds = np.array([lv.campanato for lv in profile.levels]) + np.abs(cs - c_limit)
    constant = None
    holds = None
    if decay is not None:
        rate = decay.exponent
        with np.errstate(divide="ignore"):
            ratios = dist_bounds / radii**rate
        constant = float(np.max(ratios))
        holds = math.isfinite(constant)
    return CampanatoReport(
        tuple(float(d) for d in diffs),
        c_limit,
        decay,
        degenerate,
        tuple(float(b) for b in dist_bounds),
        constant,
        holds,
    )


@dataclass(frozen=True)
class GeoLevel:
    k: int
    radius: float
    target: float          # (lam^k)^gamma
    precondition_holds: bool
    sup_abs: float
    ratio: float           # sup_abs / target


@dataclass(frozen=True)
class GeometricIterationReport:
    levels: tuple[GeoLevel, ...]
    center_value: float
    c_min: float                    # smallest C passing every level
    first_fail_unit_c: int | None   # first level failing with C = 1
    precondition_never_holds: bool


def geometric_iteration_check(
    field: SpaceTimeField,
    center,
    gamma: float,
    theta: float,
    lam: float,
    k_max: int,
    base_radius: float = 1.0,
) -> GeometricIterationReport:
    """Per-level decay check sup |u| <= C (lam^k)^gamma on the ladder.

    Each level also records whether the pointwise smallness precondition
    |u(center)| <= (lam^k)^gamma / 4 holds there.  Levels below the grid
    resolution are dropped, mirroring the profile truncation.
    """
    g = field.grid
    dx_max = max(g.dx)
    center_value = float(field.interp(*[np.asarray(c) for c in center[:-1]],
                                      np.asarray(center[-1])))
    levels = []
    for k in range(k_max + 1):
        tau = base_radius * lam**k
        cyl = make_cylinder(center, tau, theta)
        if k > 0 and (tau < dx_max or cyl.time_extent < g.dt):
            break
        _, sup_abs = sup_oscillation(field, cyl)
        target = (lam**k) ** gamma
        levels.append(GeoLevel(
            k, tau, target, abs(center_value) <= 0.25 * target, sup_abs, sup_abs / target
        ))
    ratios = [lv.ratio for lv in levels]
    first_fail = next((lv.k for lv in levels if lv.ratio > 1.0), None)
    return GeometricIterationReport(
        tuple(levels),
        center_value,
        max(ratios) if ratios else math.inf,
        first_fail,
        not any(lv.precondition_holds for lv in levels),
    )


# -- Caccioppoli energy check -------------------------------------------------


@dataclass(frozen=True)
class CaccioppoliReport:
    lhs_sup_term: float
    lhs_grad_term: float
    rhs_time_term: float
    rhs_space_term: float
    rhs_source_term: float

    @property
    def ratio(self) -> float:
        lhs = self.lhs_sup_term + self.lhs_grad_term
        rhs = self.rhs_time_term + self.rhs_space_term + self.rhs_source_term
        if lhs == 0.0:
            return 0.0
        return lhs / rhs if rhs > 0.0 else math.inf


def _node_gradient(arr: np.ndarray, h: float, axis: int) -> np.ndarray:
    g = np.empty_like(arr)
    sl = [slice(None)] * arr.ndim

    def at(i):
        s = sl.copy()
        s[axis] = i
        return tuple(s)

    g[at(slice(1, -1))] = (arr[at(slice(2, None))] - arr[at(slice(None, -2))]) / (2.0 * h)
    g[at(0)] = (arr[at(1)] - arr[at(0)]) / h
    g[at(-1)] = (arr[at(-1)] - arr[at(-2)]) / h
    return g


def _to_cells(arr: np.ndarray, dim: int) -> np.ndarray:
    c = 0.5 * (arr[:-1] + arr[1:])
    c = 0.5 * (c[:, :-1] + c[:, 1:])
    if dim == 2:
        c = 0.5 * (c[:, :, :-1] + c[:, :, 1:])
    return c


def caccioppoli_check(
    field: SpaceTimeField,
    cutoff,
    source: SourceTerm | None,
    m: float,
    region,
) -> CaccioppoliReport:
    """Evaluate both sides of the energy inequality with unit constant.

    sup_t int u^2 xi^2 + iint |u|^(m-1) |grad u|^2 xi^2   (left)
    iint u^2 xi |xi_t| + iint |u|^(m+1) (|grad xi|^2 + xi^2) + ||f||_{q,r}^2

    ``cutoff`` is a callable xi(x[, y], t) with values in [0, 1] vanishing
    on the region boundary (checked to 1e-12); derivatives of u and xi are
    centered differences, integrals the midpoint rule over region cells.
    """
    g = field.grid
    mesh = g.node_mesh()
    xi = np.empty_like(field.values)
    shape = np.broadcast(*mesh).shape if g.dim > 1 else mesh[0].shape
    for k, t in enumerate(g.t_nodes):
        xi[k] = np.broadcast_to(cutoff(*mesh, t), shape)
    if xi.min() < -1e-12 or xi.max() > 1.0 + 1e-12:
        raise ValueError("cutoff values must lie in [0, 1]")

    t0, t1 = region.time_window()
    bounds = region.space_bounds()
    # compact support: sample the cutoff on the region's boundary faces
    probes = []
    for axis, (lo, hi) in enumerate(bounds):
        for edge in (lo, hi):
            for t in (t0, 0.5 * (t0 + t1), t1):
                if g.dim == 1:
                    probes.append(abs(float(cutoff(np.asarray(edge), t))))
                else:
                    other = 0.5 * (bounds[1 - axis][0] + bounds[1 - axis][1])
                    xy = (edge, other) if axis == 0 else (other, edge)
                    probes.append(abs(float(cutoff(np.asarray(xy[0]), np.asarray(xy[1]), t))))
    for t_edge in (t0, t1):
        mids = [0.5 * (lo + hi) for lo, hi in bounds]
        probes.append(abs(float(cutoff(*[np.asarray(c) for c in mids], t_edge))))
    if max(probes) > 1e-12:
        raise CutoffNotCompact(f"cutoff reaches {max(probes):.3g} on the region boundary")

    u = field.values
    grad_u2 = sum(_node_gradient(u, g.dx[a], a + 1) ** 2 for a in range(g.dim))
    grad_xi2 = sum(_node_gradient(xi, g.dx[a], a + 1) ** 2 for a in range(g.dim))
    xi_t = _node_gradient(xi, g.dt, 0)

    def cells(node_arr):
        return _to_cells(node_arr, g.dim)

    tc = g.t_cell_centers
    tsel = np.nonzero((tc >= t0) & (tc <= t1))[0]
    sp_mesh = np.meshgrid(*[g.x_cell_centers(a) for a in range(g.dim)], indexing="ij") \
        if g.dim > 1 else (g.x_cell_centers(0),)
    mask = region.space_mask(*sp_mesh).ravel()
    space_vol = g.space_cell_volume

    def restrict(cell_arr):
        return cell_arr[tsel].reshape(tsel.size, -1)[:, mask]

    u2xi2 = restrict(cells(u**2 * xi**2))
    lhs_sup = float(u2xi2.sum(axis=1).max() * space_vol) if u2xi2.size else 0.0
    lhs_grad = float(restrict(cells(np.abs(u) ** (m - 1.0) * grad_u2 * xi**2)).sum()
                     * g.cell_volume)
    rhs_time = float(restrict(cells(u**2 * xi * np.abs(xi_t))).sum() * g.cell_volume)
    rhs_space = float(restrict(cells(np.abs(u) ** (m + 1.0) * (grad_xi2 + xi**2))).sum()
                      * g.cell_volume)
    rhs_source = 0.0
    if source is not None:
        f_field = source.as_field(g)
        rhs_source = lqr_norm(f_field, region, source.q, source.r).value ** 2
    return CaccioppoliReport(lhs_sup, lhs_grad, rhs_time, rhs_space, rhs_source)


def time_direction_oscillations(
    field: SpaceTimeField,
    center,
    theta: float,
    lam: float,
    k_max: int,
    base_radius: float = 0.5,
):
    """Oscillation over pure-time segments {x0} x (t0 - tau^theta, t0].

    Returns (t_distances, oscillations) suitable for a log-log fit against
    the time distance tau^theta.
    """
    *x0, t0 = center
    g = field.grid
    t_dists, oscs = [], []
    for k in range(k_max + 1):
        tau = base_radius * lam**k
        extent = tau**theta
        if extent < g.dt:
            break
        ts = g.t_nodes
        sel = ts[(ts >= t0 - extent) & (ts <= t0)]
        sel = np.append(sel, t0)
        vals = field.interp(*[np.full(sel.shape, c) for c in x0], sel)
        t_dists.append(extent)
        oscs.append(float(vals.max() - vals.min()))
    return np.array(t_dists), np.array(oscs)
