"""Off-grid point sets (sources, receivers) and their grid coupling.

Coupling is multilinear: a point touches the 2**ndim nodes of the cell
containing it. ``interpolate`` reads the grid into the point values and
``inject`` scatter-adds point values into the grid; with equal weights the
two are transposes of each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutOfDomain
from .grid import ExprOps, GridFunction
from .symbolic import (Absolute, Access, Add, Const, Dimension, Eq, Expr, Mul,
                       Relative, as_expr, t, xreplace, preorder)

__all__ = ["SparsePointSet", "InterpStencil", "interp_weights",
           "Interpolation", "Injection", "save_points", "load_points"]


@dataclass(frozen=True)
class InterpStencil:
    base: tuple
    weights: tuple  # corner order: itertools.product((0, 1), repeat=ndim)

    @property
    def corners(self):
        return tuple(itertools.product((0, 1), repeat=len(self.base)))

    def nodes(self):
        return [tuple(b + c for b, c in zip(self.base, corner))
                for corner in self.corners]


def interp_weights(coord, grid) -> InterpStencil:
    coord = np.asarray(coord, dtype=float)
    if coord.shape != (grid.ndim,):
        raise ValueError(f"expected {grid.ndim} coordinates, got {coord.shape}")
    base, frac = [], []
    for c, hh, n in zip(coord, grid.spacing, grid.shape):
        top = (n - 1) * hh
        if not np.isfinite(c) or c < -1e-9 * hh or c > top + 1e-9 * hh:
            raise OutOfDomain(f"coordinate {c} outside [0, {top}]")
        r = min(max(c / hh, 0.0), n - 1.0)
        b = min(int(np.floor(r)), n - 2)
        base.append(b)
        frac.append(r - b)
    weights = []
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        w = 1.0
        for k, xi in zip(corner, frac):
            w *= xi if k else 1.0 - xi
        weights.append(w)
    return InterpStencil(tuple(base), tuple(weights))


class SparsePointSet(ExprOps):
    """``npoint`` points with one value per time step.

    ``data`` has shape (ntime, npoint); ``coordinates`` (npoint, ndim) in
    grid length units.
    """

    time_varying = True
    is_sparse = True
    time_order = 0
    halo = 0

    def __init__(self, name, grid, npoint, ntime, coordinates=None,
                 dtype=np.float64):
        self.name = name
        self.grid = grid
        self.npoint = int(npoint)
        self.ntime = int(ntime)
        self.dtype = np.dtype(dtype)
        self.point_dim = Dimension(f"p_{name}")
        self.dimensions = (t, self.point_dim)
        self.shape = (self.npoint,)
        self.data = np.zeros((self.ntime, self.npoint), dtype=self.dtype)
        self.coordinates = np.zeros((self.npoint, grid.ndim))
        if coordinates is not None:
            self.coordinates[:] = coordinates

    def __repr__(self):
        return f"SparsePointSet({self.name!r}, npoint={self.npoint})"

    def _as_expr(self):
        return Access(self, (Relative(t, 0), Relative(self.point_dim, 0)))

    def stencils(self):
        return [interp_weights(c, self.grid) for c in self.coordinates]

    def interpolate(self, expr):
        """Sample ``expr`` at the points into this set's values."""
        return [Interpolation(self, expr)]

    def inject(self, field, expr):
        """Scatter-add ``expr`` (weighted) into ``field`` around each point."""
        return [Injection(self, field, expr)]


def _fresh(target, direction: int):
    """A bare time-varying function resolves to the level being written."""
    if isinstance(target, GridFunction):
        if target.time_varying:
            return target._as_expr().shifted(t, direction)
        return target._as_expr()
    return as_expr(target)


def _localize(e: Expr, pts: SparsePointSet, p: int, node) -> Expr:
    """Pin relative space indices to ``node`` and point indices to ``p``."""
    table = {}
    for acc in preorder(e):
        if not isinstance(acc, Access) or acc in table:
            continue
        new = []
        for i in acc.indices:
            if isinstance(i, Relative) and i.dim == pts.point_dim:
                i = Absolute(p)
            elif isinstance(i, Relative) and not i.dim.is_time:
                k = acc.func.grid.dimensions.index(i.dim)
                i = Absolute(node[k] + i.offset)
            new.append(i)
        table[acc] = Access(acc.func, tuple(new))
    return xreplace(e, table)


@dataclass(frozen=True, eq=False)
class Interpolation:
    points: SparsePointSet
    expr: object

    kind = "interpolate"

    def resolve(self, direction: int = 1) -> "Interpolation":
        return Interpolation(self.points, _fresh(self.expr, direction))

    @property
    def target(self) -> Access:
        return self.points._as_expr()

    def equations(self, direction: int = 1):
        """One explicit assignment per point, terms in corner order."""
        expr = _fresh(self.expr, direction)
        out = []
        for p, st in enumerate(self.points.stencils()):
            terms = [Mul(Const(w), _localize(expr, self.points, p, node))
                     for w, node in zip(st.weights, st.nodes())]
            lhs = _localize(self.target, self.points, p, st.base)
            out.append(Eq(lhs, Add(*terms)))
        return out


@dataclass(frozen=True, eq=False)
class Injection:
    points: SparsePointSet
    field: object
    expr: object

    kind = "inject"

    def resolve(self, direction: int = 1) -> "Injection":
        return Injection(self.points, _fresh(self.field, direction),
                         as_expr(self.expr))

    def equations(self, direction: int = 1):
        """One explicit increment per point and corner, point-major."""
        field = _fresh(self.field, direction)
        expr = as_expr(self.expr)
        out = []
        for p, st in enumerate(self.points.stencils()):
            for w, node in zip(st.weights, st.nodes()):
                lhs = _localize(field, self.points, p, node)
                val = _localize(expr, self.points, p, node)
                out.append(Eq(lhs, Add(lhs, Mul(Const(w), val))))
        return out


# ---------------------------------------------------------------------------
# CSV I/O


def save_points(path, pts: SparsePointSet) -> Path:
    """One row per point: coordinates, then one value per time step."""
    path = Path(path)
    axes = [d.name for d in pts.grid.dimensions]
    header = ",".join(axes + [f"t{k}" for k in range(pts.ntime)])
    table = np.hstack([pts.coordinates, pts.data.T])
    np.savetxt(path, table, delimiter=",", header=header, comments="",
               fmt="%.17g")
    return path


def load_points(path, name, grid) -> SparsePointSet:
    path = Path(path)
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    coords = table[:, :grid.ndim]
    values = table[:, grid.ndim:]
    pts = SparsePointSet(name, grid, len(coords), values.shape[1], coords)
    pts.data[:] = values.T
    return pts
