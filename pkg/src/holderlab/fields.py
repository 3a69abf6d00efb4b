"""Uniform space-time grids and sampled scalar fields.

Fields are stored dense, row-major, time-outer (shape ``(nt, nx)`` in 1D,
``(nt, nx0, nx1)`` in 2D) and are treated as immutable after construction.
Off-node values come from piecewise-multilinear interpolation, which keeps
interpolated values inside the node range of the surrounding cell.
Quadrature is the composite midpoint rule over space-time cells whose
centers fall in the requested region.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import (
    EmptyIntersection,
    EvaluationFailure,
    IoFailure,
    OutOfDomain,
)

__all__ = [
    "GridSpec",
    "SpaceTimeField",
    "Rectangle",
    "ClosedForm",
    "SourceTerm",
    "CATALOG",
    "expression",
    "sample",
    "interpolate_eval",
    "integrate_region",
    "rough_power_cap",
    "save_field",
    "load_field",
    "export_csv",
]

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid: node extents and counts per axis."""

    dim: int
    x_extent: tuple[tuple[float, float], ...]
    nx: tuple[int, ...]
    t_extent: tuple[float, float]
    nt: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.dim}")
        if len(self.x_extent) != self.dim or len(self.nx) != self.dim:
            raise ValueError("x_extent and nx must have one entry per axis")
        for (lo, hi), n in zip(self.x_extent, self.nx):
            if not hi > lo:
                raise ValueError(f"empty spatial extent ({lo}, {hi})")
            if n < 3:
                raise ValueError(f"need at least 3 nodes per axis, got {n}")
        if not self.t_extent[1] > self.t_extent[0]:
            raise ValueError(f"empty time extent {self.t_extent}")
        if self.nt < 2:
            raise ValueError(f"need at least 2 time levels, got {self.nt}")

    @classmethod
    def one_d(cls, x_lo, x_hi, nx, t_lo, t_hi, nt):
        return cls(1, ((float(x_lo), float(x_hi)),), (int(nx),), (float(t_lo), float(t_hi)), int(nt))

    @classmethod
    def two_d(cls, x_ext, y_ext, nx, ny, t_lo, t_hi, nt):
        return cls(
            2,
            (tuple(map(float, x_ext)), tuple(map(float, y_ext))),
            (int(nx), int(ny)),
            (float(t_lo), float(t_hi)),
            int(nt),
        )

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.x_extent, self.nx))

    @property
    def dt(self) -> float:
        return (self.t_extent[1] - self.t_extent[0]) / (self.nt - 1)

    def x_nodes(self, axis: int = 0) -> np.ndarray:
        lo, hi = self.x_extent[axis]
        return np.linspace(lo, hi, self.nx[axis])

    @property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(self.t_extent[0], self.t_extent[1], self.nt)

    def x_cell_centers(self, axis: int = 0) -> np.ndarray:
        nodes = self.x_nodes(axis)
        return 0.5 * (nodes[:-1] + nodes[1:])

    @property
    def t_cell_centers(self) -> np.ndarray:
        t = self.t_nodes
        return 0.5 * (t[:-1] + t[1:])

    @property
    def cell_volume(self) -> float:
        """Space-time cell volume dt * prod(dx)."""
        return self.dt * math.prod(self.dx)

    @property
    def space_cell_volume(self) -> float:
        return math.prod(self.dx)

    def spatial_shape(self) -> tuple[int, ...]:
        return tuple(self.nx)

    def node_mesh(self):
        """Spatial node coordinates as broadcastable meshgrid arrays."""
        axes = [self.x_nodes(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij") if self.dim > 1 else (axes[0],)


@dataclass
class SpaceTimeField:
    """Sampled scalar field on a :class:`GridSpec`; immutable by convention."""

    grid: GridSpec
    values: np.ndarray
    name: str = ""
    provenance: str = ""
    _cells: np.ndarray | None = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = (self.grid.nt, *self.grid.spatial_shape())
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != grid shape {expected}")
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")

    def cell_values(self) -> np.ndarray:
        """Interpolated values at space-time cell centers (cached)."""
        if self._cells is None:
            v = self.values
            c = 0.5 * (v[:-1] + v[1:])  # time average
            c = 0.5 * (c[:, :-1] + c[:, 1:])
            if self.grid.dim == 2:
                c = 0.5 * (c[:, :, :-1] + c[:, :, 1:])
            self._cells = c
        return self._cells

    def interp(self, *coords) -> np.ndarray:
        """Multilinear interpolation; ``coords`` is (x[, y], t) arrays."""
        return _interp(self, coords[:-1], coords[-1])

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def _axis_locate(u_coord, lo, h, n, what):
    """Fractional index with snapping so node lookups are exact."""
    u = (np.asarray(u_coord, dtype=float) - lo) / h
    span_tol = _EDGE_TOL * max(1.0, n - 1.0)
    if np.any(u < -span_tol) or np.any(u > (n - 1) + span_tol):
        raise OutOfDomain(f"{what}-coordinate outside grid extent")
    u = np.clip(u, 0.0, n - 1.0)
    idx = np.minimum(np.floor(u).astype(int), n - 2)
    w = u - idx
    w = np.where(w < span_tol, 0.0, np.where(w > 1.0 - span_tol, 1.0, w))
    return idx, w


def _interp(f: SpaceTimeField, xs: tuple, ts) -> np.ndarray:
    g = f.grid
    xs = [np.asarray(x, dtype=float) for x in xs]
    ts = np.asarray(ts, dtype=float)
    it, wt = _axis_locate(ts, g.t_extent[0], g.dt, g.nt, "t")
    locs = [
        _axis_locate(x, g.x_extent[a][0], g.dx[a], g.nx[a], "x")
        for a, x in enumerate(xs)
    ]
    v = f.values
    if g.dim == 1:
        (ix, wx) = locs[0]
        c0 = v[it, ix] * (1 - wx) + v[it, ix + 1] * wx
        c1 = v[it + 1, ix] * (1 - wx) + v[it + 1, ix + 1] * wx
        return c0 * (1 - wt) + c1 * wt
    (ix, wx), (iy, wy) = locs
    out = np.zeros(np.broadcast(ts, *xs).shape)
    for dt_, tw in ((0, 1 - wt), (1, wt)):
        plane = (
            v[it + dt_, ix, iy] * (1 - wx) * (1 - wy)
            + v[it + dt_, ix + 1, iy] * wx * (1 - wy)
            + v[it + dt_, ix, iy + 1] * (1 - wx) * wy
            + v[it + dt_, ix + 1, iy + 1] * wx * wy
        )
        out = out + plane * tw
    return out


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned space-time box, usable as a quadrature region."""

    x_extent: tuple[tuple[float, float], ...]
    t_extent: tuple[float, float]

    @classmethod
    def one_d(cls, x_lo, x_hi, t_lo, t_hi):
        return cls(((float(x_lo), float(x_hi)),), (float(t_lo), float(t_hi)))

    def time_window(self):
        return self.t_extent

    def space_bounds(self):
        return self.x_extent

    def space_mask(self, *mesh):
        m = np.ones(np.broadcast(*mesh).shape if len(mesh) > 1 else mesh[0].shape, dtype=bool)
        for (lo, hi), c in zip(self.x_extent, mesh):
            m &= (c >= lo) & (c <= hi)
        return m

    @classmethod
    def full_domain(cls, grid: GridSpec):
        return cls(grid.x_extent, grid.t_extent)


def _region_cells(field: SpaceTimeField, region):
    """Cell-center values and counts for cells inside ``region``.

    Returns (values_2d, n_slices) where values_2d has one row per time
    slice inside the window, flattened spatial cells in the region's mask.
    """
    g = field.grid
    t0, t1 = region.time_window()
    tc = g.t_cell_centers
    tsel = np.nonzero((tc >= t0) & (tc <= t1))[0]
    if tsel.size == 0:
        raise EmptyIntersection("no time cells inside region")
    mesh = np.meshgrid(*[g.x_cell_centers(a) for a in range(g.dim)], indexing="ij") \
        if g.dim > 1 else (g.x_cell_centers(0),)
    mask = region.space_mask(*mesh)
    if not mask.any():
        raise EmptyIntersection("no spatial cells inside region")
    cells = field.cell_values()[tsel]
    flat = cells.reshape(tsel.size, -1)[:, mask.ravel()]
    return flat, tsel.size


def sample(fn: Callable, grid: GridSpec, name: str = "", provenance: str = "") -> SpaceTimeField:
    """Sample a closed-form expression ``fn(x[, y], t)`` node-exactly.

    Raises ``EvaluationFailure`` if the expression is singular at a node.
    """
    mesh = grid.node_mesh()
    out = np.empty((grid.nt, *grid.spatial_shape()))
    for k, t in enumerate(grid.t_nodes):
        out[k] = np.broadcast_to(fn(*mesh, t), grid.spatial_shape())
    if not np.isfinite(out).all():
        raise EvaluationFailure("expression produced non-finite node values")
    return SpaceTimeField(grid, out, name=name, provenance=provenance)


def interpolate_eval(field: SpaceTimeField, point) -> float:
    """Value at a space-time point ``(x[, y], t)`` by multilinear interpolation."""
    *xs, t = point
    return float(field.interp(*[np.asarray(x, dtype=float) for x in xs], np.asarray(t)))


def integrate_region(field: SpaceTimeField, region, weight_power: float = 1.0) -> float:
    """Integral of |field|^weight_power over the region, midpoint rule.

    Cells participate when their space-time center lies in the region.
    """
    flat, _ = _region_cells(field, region)
    if weight_power == 1.0:
        acc = np.abs(flat).sum()
    else:
        acc = (np.abs(flat) ** weight_power).sum()
    return float(acc * field.grid.cell_volume)


def covered_measure(field: SpaceTimeField, region) -> float:
    """Total volume of the cells the midpoint rule assigns to the region."""
    flat, _ = _region_cells(field, region)
    return float(flat.size * field.grid.cell_volume)


# -- closed-form expression catalog -----------------------------------------

def _radius(xs):
    if len(xs) == 1:
        return np.abs(xs[0])
    return np.sqrt(sum(np.asarray(x) ** 2 for x in xs))


def _make_zero():
    return lambda *a: np.zeros(np.broadcast(*a).shape)


def _make_constant(value=1.0):
    return lambda *a: np.full(np.broadcast(*a).shape, float(value))


def _make_affine(slopes=(1.0,), t_slope=0.0, offset=0.0):
    def fn(*a):
        *xs, t = a
        out = offset + t_slope * np.asarray(t, dtype=float)
        for s, x in zip(slopes, xs):
            out = out + s * np.asarray(x, dtype=float)
        return out
    return fn


def _make_power_abs(s=0.75, center=None, scale=1.0):
    def fn(*a):
        *xs, _t = a
        c = center if center is not None else (0.0,) * len(xs)
        shifted = [np.asarray(x) - ci for x, ci in zip(xs, c)]
        return scale * _radius(shifted) ** s
    return fn


def _make_power_spacetime(s_x=0.75, s_t=0.5, t_ref=0.0, center=None, cx=1.0, ct=1.0):
    def fn(*a):
        *xs, t = a
        c = center if center is not None else (0.0,) * len(xs)
        shifted = [np.asarray(x) - ci for x, ci in zip(xs, c)]
        return cx * _radius(shifted) ** s_x + ct * np.abs(t_ref - np.asarray(t)) ** s_t
    return fn


def _make_sin_product(k=(1.0,), omega=0.0, amplitude=1.0, phase=0.0):
    def fn(*a):
        *xs, t = a
        out = amplitude * np.exp(-omega * np.asarray(t, dtype=float))
        for ki, x in zip(k, xs):
            out = out * np.sin(ki * np.pi * np.asarray(x) + phase)
        return out
    return fn


def _make_heat_mode(extent=(0.0, 1.0), amplitude=1.0, mode=1, dim=1):
    """Separable heat solution A sin(k pi (x-lo)/L)... exp(-dim k^2 pi^2 t / L^2)."""
    lo, hi = extent
    length = hi - lo
    freq = mode * math.pi / length

    def fn(*a):
        *xs, t = a
        out = amplitude * np.exp(-len(xs) * freq**2 * np.asarray(t, dtype=float))
        for x in xs:
            out = out * np.sin(freq * (np.asarray(x) - lo))
        return out
    return fn


def _make_gaussian(center=None, width=0.25, amplitude=1.0):
    def fn(*a):
        *xs, _t = a
        c = center if center is not None else (0.0,) * len(xs)
        shifted = [np.asarray(x) - ci for x, ci in zip(xs, c)]
        return amplitude * np.exp(-(_radius(shifted) / width) ** 2)
    return fn


def _make_bump(x_support=((-0.5, 0.5),), t_support=(0.0, 1.0)):
    """Tensor quartic bump in [0, 1], vanishing with its gradient on the box edge."""
    def one_axis(coord, lo, hi):
        s = (2.0 * np.asarray(coord, dtype=float) - lo - hi) / (hi - lo)
        return np.where(np.abs(s) < 1.0, (1.0 - s**2) ** 2, 0.0)

    def fn(*a):
        *xs, t = a
        out = one_axis(t, *t_support)
        for x, (lo, hi) in zip(xs, x_support):
            out = out * one_axis(x, lo, hi)
        return out
    return fn


def _make_barenblatt(m=2.0, n=1, mass=1.0):
    from .solvers import BarenblattPME  # local import: solvers owns the profile

    ref = BarenblattPME(m=m, n=n, mass=mass)
    return lambda *a: ref.eval(*a)


def _make_trig_series(seed=0, terms=4, kink=0.0, extent=(-1.0, 1.0)):
    """Seeded random trig polynomial plus an optional |x - c| kink (1D)."""
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=(terms, 2))
    kink_pos = float(rng.uniform(*extent))
    kink_amp = float(kink)
    lo, hi = extent
    length = hi - lo

    def fn(*a):
        x, _t = a
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for j in range(terms):
            w = (j + 1) * math.pi / length
            out = out + coeffs[j, 0] * np.sin(w * (x - lo)) + coeffs[j, 1] * np.cos(w * (x - lo))
        if kink_amp:
            out = out + kink_amp * np.abs(x - kink_pos)
        return out
    return fn


def _make_rough_power(sigma=0.4, cap=None, center=0.0):
    """|x - c|^(-sigma), capped so node sampling stays finite."""
    def fn(*a):
        *xs, _t = a
        shifted = [np.asarray(x) - center for x in xs]
        r = _radius(shifted)
        with np.errstate(divide="ignore"):
            out = np.where(r > 0, r ** (-sigma), np.inf)
        if cap is not None:
            out = np.minimum(out, cap)
        return out
    return fn


def rough_power_cap(sigma: float, dx: float) -> float:
    """Cell-average-consistent cap for |x|^(-sigma) on a node-centered cell."""
    if not 0.0 < sigma < 1.0:
        raise ValueError("cap defined for sigma in (0, 1)")
    return (dx / 2.0) ** (-sigma) / (1.0 - sigma)


CATALOG: dict[str, Callable] = {
    "zero": _make_zero,
    "constant": _make_constant,
    "affine": _make_affine,
    "power_abs": _make_power_abs,
    "power_spacetime": _make_power_spacetime,
    "sin_product": _make_sin_product,
    "heat_mode": _make_heat_mode,
    "gaussian": _make_gaussian,
    "bump": _make_bump,
    "barenblatt": _make_barenblatt,
    "trig_series": _make_trig_series,
    "rough_power": _make_rough_power,
}


def expression(name: str, **params) -> Callable:
    """Closed-form expression from the fixed catalog."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown expression {name!r}; catalog: {sorted(CATALOG)}") from None
    return factory(**params)


@dataclass(frozen=True)
class ClosedForm:
    """Named catalog expression plus its parameters."""

    expr: str
    params: dict

    def fn(self) -> Callable:
        return expression(self.expr, **self.params)

    def __call__(self, *a):
        return self.fn()(*a)


@dataclass
class SourceTerm:
    """Source f with its declared L^q (space) / L^r (time) integrability."""

    form: ClosedForm | SpaceTimeField
    q: float = math.inf
    r: float = math.inf

    def eval_nodes(self, grid: GridSpec, t: float) -> np.ndarray:
        """Spatial node values of f at time t."""
        if isinstance(self.form, SpaceTimeField):
            mesh = grid.node_mesh()
            tt = np.full(np.broadcast(*mesh).shape if grid.dim > 1 else mesh[0].shape, t)
            return self.form.interp(*mesh, tt)
        return np.broadcast_to(np.asarray(self.form(*grid.node_mesh(), t), dtype=float),
                               grid.spatial_shape()).copy()

    def as_field(self, grid: GridSpec) -> SpaceTimeField:
        if isinstance(self.form, SpaceTimeField):
            return self.form
        return sample(self.form.fn(), grid, name="source")

    @classmethod
    def zero(cls):
        return cls(ClosedForm("zero", {}))


# -- serialization -----------------------------------------------------------

_MAGIC = b"HOLDERLAB-FIELD v1\n"


def save_field(field: SpaceTimeField, path) -> None:
    """Self-describing container: magic line, JSON grid header, raw float64."""
    g = field.grid
    header = {
        "dim": g.dim,
        "x_extent": [list(e) for e in g.x_extent],
        "nx": list(g.nx),
        "t_extent": list(g.t_extent),
        "nt": g.nt,
        "name": field.name,
        "provenance": field.provenance,
    }
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write field to {path}: {exc}") from exc


def load_field(path) -> SpaceTimeField:
    try:
        with open(path, "rb") as fh:
            magic = fh.readline()
            if magic != _MAGIC:
                raise IoFailure(f"{path} is not a field container")
            header = json.loads(fh.readline().decode())
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read field from {path}: {exc}") from exc
    grid = GridSpec(
        header["dim"],
        tuple(tuple(e) for e in header["x_extent"]),
        tuple(header["nx"]),
        tuple(header["t_extent"]),
        header["nt"],
    )
    values = np.frombuffer(raw, dtype="<f8").reshape(grid.nt, *grid.spatial_shape()).copy()
    return SpaceTimeField(grid, values, name=header.get("name", ""),
                          provenance=header.get("provenance", ""))


def export_csv(field: SpaceTimeField, path) -> None:
    """Long-format CSV with columns t,x[,y],u."""
    g = field.grid
    cols = ["t", "x", "u"] if g.dim == 1 else ["t", "x", "y", "u"]
    try:
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(g.t_nodes.tolist()):
                if g.dim == 1:
                    for x, v in zip(g.x_nodes(0).tolist(), field.values[k].tolist()):
                        fh.write(f"{t!r},{x!r},{v!r}\n")
                else:
                    xs, ys = g.x_nodes(0).tolist(), g.x_nodes(1).tolist()
                    for i, x in enumerate(xs):
                        for j, y in enumerate(ys):
                            fh.write(f"{t!r},{x!r},{y!r},{float(field.values[k, i, j])!r}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write CSV to {path}: {exc}") from exc
