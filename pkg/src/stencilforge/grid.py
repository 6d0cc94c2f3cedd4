"""Cartesian grids and the data-carrying functions defined on them."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import HaloExceeded, NotTimeVarying
from .symbolic import Access, Deriv, Dimension, Relative, Add, t, x, y, z

__all__ = ["Grid", "GridFunction", "Function", "TimeFunction", "time_shift",
           "dump_field", "load_field"]


class Grid:
    """Uniform grid with origin at zero.

    Either ``extent`` (physical length per dimension) or ``spacing`` may be
    given; with neither, the spacing is 1.
    """

    def __init__(self, shape, extent=None, spacing=None, dimensions=None):
        self.shape = tuple(int(n) for n in shape)
        if any(n < 3 for n in self.shape):
            raise ValueError(f"grid shape {self.shape} has an extent below 3")
        ndim = len(self.shape)
        if dimensions is None:
            if ndim > 3:
                raise ValueError("default dimension names cover up to 3D")
            dimensions = (x, y, z)[:ndim]
        self.dimensions = tuple(
            d if isinstance(d, Dimension) else Dimension(d) for d in dimensions)
        if len(self.dimensions) != ndim:
            raise ValueError("one dimension name per shape entry required")
        if spacing is not None:
            sp = np.broadcast_to(np.asarray(spacing, dtype=float), (ndim,))
        elif extent is not None:
            ext = np.broadcast_to(np.asarray(extent, dtype=float), (ndim,))
            sp = ext / (np.asarray(self.shape) - 1)
        else:
            sp = np.ones(ndim)
        if np.any(sp <= 0):
            raise ValueError("grid spacing must be positive")
        self.spacing = tuple(float(v) for v in sp)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def extent(self):
        return tuple(h * (n - 1) for h, n in zip(self.spacing, self.shape))

    @property
    def spacing_map(self):
        return dict(zip(self.dimensions, self.spacing))

    def dimension(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)

    def coords(self, dim_index: int):
        n, hh = self.shape[dim_index], self.spacing[dim_index]
        return np.arange(n) * hh

    def __repr__(self):
        return f"Grid(shape={self.shape}, spacing={self.spacing})"


class ExprOps:
    """Arithmetic on a data object acts on its centre access."""

    def __add__(self, o):
        return self._as_expr() + o

    def __radd__(self, o):
        return o + self._as_expr()

    def __sub__(self, o):
        return self._as_expr() - o

    def __rsub__(self, o):
        return o - self._as_expr()

    def __mul__(self, o):
        return self._as_expr() * o

    def __rmul__(self, o):
        return o * self._as_expr()

    def __truediv__(self, o):
        return self._as_expr() / o

    def __rtruediv__(self, o):
        return o / self._as_expr()

    def __neg__(self):
        return -self._as_expr()

    def __pow__(self, n):
        return self._as_expr() ** n


class _Indexer:
    def __init__(self, func):
        self.func = func

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Access(self.func, idx)


class GridFunction(ExprOps):
    """Named field on a grid that owns its data buffers.

    Time-varying functions hold ``time_order + 1`` buffers addressed
    cyclically; the leading data axis is the buffer index.
    """

    time_varying = False

    def __init__(self, name, grid, space_order=2, dimensions=None,
                 dtype=np.float64, time_order=0):
        if space_order < 2 or space_order % 2:
            raise ValueError("space_order must be even and >= 2")
        self.name = name
        self.grid = grid
        self.space_order = space_order
        self.time_order = time_order
        self.dtype = np.dtype(dtype)
        if dimensions is None:
            space = grid.dimensions
        else:
            space = tuple(grid.dimension(d) if isinstance(d, str) else d
                          for d in dimensions)
        self.space_dimensions = space
        self.dimensions = ((t,) if self.time_varying else ()) + space
        shape = tuple(grid.shape[grid.dimensions.index(d)] for d in space)
        self.shape = shape
        if self.time_varying:
            self.data = np.zeros((time_order + 1,) + shape, dtype=self.dtype)
        else:
            self.data = np.zeros(shape, dtype=self.dtype)

    @property
    def halo(self):
        return self.space_order // 2

    @property
    def nbuffers(self):
        return self.time_order + 1 if self.time_varying else 1

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    # symbolic views -----------------------------------------------------

    def _as_expr(self):
        return Access(self, tuple(Relative(d, 0) for d in self.dimensions))

    @property
    def center(self):
        return self._as_expr()

    @property
    def indexed(self):
        return _Indexer(self)

    def diff(self, dim, order=1, side="centered", accuracy=None):
        if isinstance(dim, str):
            dim = t if dim == "t" else self.grid.dimension(dim)
        if accuracy is None:
            accuracy = self.space_order if not dim.is_time else 2
        return Deriv(self._as_expr(), dim, order, side, accuracy)

    def _space(self, name):
        try:
            return self.grid.dimension(name)
        except KeyError:
            raise AttributeError(
                f"{self.name} has no dimension {name!r}") from None

    # first derivatives
    @property
    def dxl(self):
        return self.diff(self._space("x"), 1, "left", 1)

    @property
    def dyl(self):
        return self.diff(self._space("y"), 1, "left", 1)

    @property
    def dzl(self):
        return self.diff(self._space("z"), 1, "left", 1)

    @property
    def dxr(self):
        return self.diff(self._space("x"), 1, "right", 1)

    @property
    def dyr(self):
        return self.diff(self._space("y"), 1, "right", 1)

    @property
    def dzr(self):
        return self.diff(self._space("z"), 1, "right", 1)

    @property
    def dx(self):
        return self.diff(self._space("x"), 1, "centered", self.space_order)

    @property
    def dy(self):
        return self.diff(self._space("y"), 1, "centered", self.space_order)

    @property
    def dz(self):
        return self.diff(self._space("z"), 1, "centered", self.space_order)

    # second derivatives
    @property
    def dx2(self):
        return self.diff(self._space("x"), 2, "centered", self.space_order)

    @property
    def dy2(self):
        return self.diff(self._space("y"), 2, "centered", self.space_order)

    @property
    def dz2(self):
        return self.diff(self._space("z"), 2, "centered", self.space_order)

    @property
    def laplace(self):
        terms = [self.diff(d, 2, "centered", self.space_order)
                 for d in self.space_dimensions]
        return terms[0] if len(terms) == 1 else Add(*terms)


class Function(GridFunction):
    """Time-invariant field (single buffer)."""


class TimeFunction(GridFunction):
    time_varying = True

    def __init__(self, name, grid, time_order=1, space_order=2,
                 dimensions=None, dtype=np.float64):
        if time_order < 1:
            raise ValueError("time_order must be >= 1")
        super().__init__(name, grid, space_order=space_order,
                         dimensions=dimensions, dtype=dtype,
                         time_order=time_order)

    @property
    def dt(self):
        # centred when a second past level exists, so that flipping the
        # sign of a dt term yields the exact discrete transpose
        if self.time_order >= 2:
            return self.diff(t, 1, "centered", 2)
        return self.diff(t, 1, "right", 1)

    @property
    def dtl(self):
        return self.diff(t, 1, "left", 1)

    @property
    def dtr(self):
        return self.diff(t, 1, "right", 1)

    @property
    def dt2(self):
        return self.diff(t, 2, "centered", 2)

    @property
    def forward(self):
        return time_shift(self, 1)

    @property
    def backward(self):
        return time_shift(self, -1)

    def buffer(self, time_index: int) -> np.ndarray:
        return self.data[time_index % self.nbuffers]


def time_shift(f, steps: int) -> Access:
    """Access to ``f`` moved ``steps`` levels along the time axis."""
    acc = f._as_expr() if isinstance(f, GridFunction) else f
    if not isinstance(acc, Access) or not acc.func.time_varying:
        raise NotTimeVarying(f"{getattr(acc, 'func', f)} has no time axis")
    new = acc.shifted(t, steps)
    if abs(new.offset(t)) > acc.func.time_order:
        raise HaloExceeded(
            f"time offset {new.offset(t)} exceeds time_order "
            f"{acc.func.time_order} of {acc.func.name}")
    return new


# ---------------------------------------------------------------------------
# field I/O


def dump_field(path, array) -> Path:
    """Write a field as CSV (``.csv``, 1D/2D only) or flat row-major binary."""
    path = Path(path)
    arr = np.asarray(array)
    if path.suffix == ".csv":
        if arr.ndim > 2:
            raise ValueError("CSV dumps support 1D and 2D fields only")
        np.savetxt(path, np.atleast_2d(arr), delimiter=",", fmt="%.17g")
    else:
        np.ascontiguousarray(arr).tofile(path)
    return path


def load_field(path, shape=None, dtype=np.float64) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".csv":
        arr = np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)
    else:
        arr = np.fromfile(path, dtype=dtype)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr
