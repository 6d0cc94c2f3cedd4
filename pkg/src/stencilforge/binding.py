"""Argument binding by name and the time-index conventions of a run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingBinding, ShapeMismatch

__all__ = ["DataBinding", "bind", "array_for", "time_steps"]


@dataclass
class DataBinding:
    """Arrays and scalars for one run, keyed by symbol name.

    ``time`` is the half-open step range (start, end); a Forward loop
    visits start..end-1 and a Backward loop end-1..start.
    """

    arrays: dict
    scalars: dict = field(default_factory=dict)
    time: tuple = (0, 0)


def _as_array(name, value):
    arr = value if isinstance(value, np.ndarray) else getattr(value, "data",
                                                              None)
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"argument {name!r} must be an array or data object")
    return arr


def bind(nest, dtype, kwargs=None, time=None, time_m=0) -> DataBinding:
    """Match user arguments to the nest's symbols by name.

    Data objects default to their own ``data``; scalars without a default
    raise MissingBinding. Scratch buffers for hoisted values are private to
    the binding.
    """
    kwargs = dict(kwargs or {})
    dtype = np.dtype(dtype)
    arrays = {}
    for f in nest.functions:
        arr = _as_array(f.name, kwargs.pop(f.name, f))
        if arr.shape != f.data.shape:
            raise ShapeMismatch(
                f"{f.name}: expected shape {f.data.shape}, got {arr.shape}")
        if arr.dtype != f.dtype:
            raise ShapeMismatch(
                f"{f.name}: expected dtype {f.dtype}, got {arr.dtype}")
        arrays[f.name] = arr
    for f in nest.scratch:
        arrays[f.name] = np.zeros(f.data.shape, dtype=dtype)
    scalars = {}
    for sym in nest.scalars:
        if sym.name not in kwargs:
            raise MissingBinding(sym.name)
        scalars[sym.name] = dtype.type(kwargs.pop(sym.name))
    if kwargs:
        raise TypeError(f"unknown arguments: {sorted(kwargs)}")
    span = (0, 0)
    if nest.time is not None:
        if time is None:
            raise MissingBinding("time")
        if time < 0 or time_m < 0 or time_m > time:
            raise ValueError(f"bad time range [{time_m}, {time})")
        span = (int(time_m), int(time))
        _check_sparse_span(nest, span)
    return DataBinding(arrays, scalars, span)


def _check_sparse_span(nest, span):
    lo, hi = span
    if lo == hi:
        return
    from .symbolic import Access, Relative, preorder

    for item in nest.body:
        op = getattr(item, "op", None)
        if op is None:
            continue
        exprs = [op.expr, getattr(op, "target", op.expr)]
        for e in exprs:
            for acc in preorder(e):
                if not (isinstance(acc, Access)
                        and getattr(acc.func, "is_sparse", False)):
                    continue
                i = acc.indices[0]
                k = i.offset if isinstance(i, Relative) else 0
                nt = acc.func.ntime
                if lo + k < 0 or hi + k > nt:
                    raise ShapeMismatch(
                        f"{acc.func.name} holds {nt} time samples; run "
                        f"needs [{lo + k}, {hi + k})")


def array_for(key, arrays, t):
    """The physical array behind a (function, time spec) slot at step t."""
    f, tspec = key
    arr = arrays[f.name]
    if tspec is None:
        return arr
    kind, v = tspec
    if getattr(f, "is_sparse", False):
        k = t + v if kind == "r" else v
        return arr[k]
    nbuf = arr.shape[0]
    return arr[(t + v if kind == "r" else v) % nbuf]


def time_steps(nest, binding):
    lo, hi = binding.time
    if nest.time is None:
        return [None]
    if nest.direction > 0:
        return range(lo, hi)
    return range(hi - 1, lo - 1, -1)
