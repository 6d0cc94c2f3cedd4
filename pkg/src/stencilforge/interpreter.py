"""Reference tree-walking interpreter.

Evaluates scheduled nests one grid point at a time straight from the
expression trees. It is slow and exists as the oracle for the compiled
tapes; with ``check_bounds`` every array access is range-checked.
"""

from __future__ import annotations

import itertools

import numpy as np

from .binding import array_for, time_steps
from .dse import _neg_rest
from .errors import BoundsViolation
from .scheduler import Cluster
from .symbolic import (Access, Add, Const, Div, Mul, Pow, Relative, Symbol)
from .tape import slot_key

__all__ = ["evaluate", "run_reference"]


def evaluate(e, load, scalar, temps=None, cast=float):
    """Evaluate ``e`` with the operation order shared by all backends.

    ``load(access)`` and ``scalar(name)`` supply leaf values; these may be
    numbers or arrays (element-wise evaluation).
    """
    temps = temps or {}

    def ev(n):
        if isinstance(n, Const):
            return cast(n.value)
        if isinstance(n, Access):
            return load(n)
        if isinstance(n, Symbol):
            got = temps.get(n)
            return scalar(n.name) if got is None else got
        if isinstance(n, Add):
            acc = ev(n.args[0])
            for a in n.args[1:]:
                pos = _neg_rest(a)
                acc = acc + ev(a) if pos is None else acc - ev(pos)
            return acc
        if isinstance(n, Mul):
            ops = n.args
            neg = isinstance(ops[0], Const) and ops[0].value == -1.0
            if neg:
                ops = ops[1:]
            acc = ev(ops[0])
            for a in ops[1:]:
                acc = acc * ev(a)
            return -acc if neg else acc
        if isinstance(n, Div):
            return ev(n.num) / ev(n.den)
        if isinstance(n, Pow):
            if n.exp == 0:
                return cast(1.0)
            b = ev(n.base)
            acc = b
            for _ in range(n.exp - 1):
                acc = acc * b
            return acc
        raise TypeError(f"cannot evaluate {type(n).__name__}")

    return ev(e)


class _PointRunner:
    def __init__(self, binding, dtype, check_bounds):
        self.b = binding
        self.cast = np.dtype(dtype).type
        self.check = check_bounds
        self.t = None
        self.point = {}

    def _index(self, acc):
        f = acc.func
        idx = acc.indices[1:] if f.time_varying else acc.indices
        out = []
        for i in idx:
            out.append(self.point[i.dim] + i.offset if isinstance(i, Relative)
                       else i.value)
        return tuple(out)

    def _target(self, acc):
        arr = array_for(slot_key(acc), self.b.arrays, self.t)
        idx = self._index(acc)
        if self.check or any(k < 0 for k in idx):
            for k, n in zip(idx, arr.shape):
                if not 0 <= k < n:
                    raise BoundsViolation(
                        f"{acc} at t={self.t}, point {self._fmt_point()}: "
                        f"index {idx} outside shape {arr.shape}")
        return arr, idx

    def _fmt_point(self):
        return {d.name: v for d, v in self.point.items()}

    def load(self, acc):
        arr, idx = self._target(acc)
        return arr[idx]

    def store(self, acc, val):
        arr, idx = self._target(acc)
        arr[idx] = val

    def scalar(self, name):
        return self.b.scalars[name]

    def cluster(self, c: Cluster):
        ranges = [range(lp.start, lp.stop) for lp in c.loops]
        dims = c.dims
        for pt in itertools.product(*ranges):
            self.point = dict(zip(dims, pt))
            temps = {}
            for sym, d in c.temporaries:
                temps[sym] = evaluate(d, self.load, self.scalar, temps,
                                      self.cast)
            for eq in c.assignments:
                val = evaluate(eq.rhs, self.load, self.scalar, temps,
                               self.cast)
                if isinstance(eq.lhs, Symbol):
                    self.b.scalars[eq.lhs.name] = self.cast(val)
                else:
                    self.store(eq.lhs, val)
        self.point = {}

    def equations(self, eqs):
        for eq in eqs:
            self.store(eq.lhs, evaluate(eq.rhs, self.load, self.scalar, None,
                                        self.cast))


def run_reference(nest, binding, dtype=np.float64, check_bounds=False,
                  trace=None):
    """Execute ``nest`` point by point, mutating ``binding`` arrays."""
    r = _PointRunner(binding, dtype, check_bounds)
    sparse = {id(item): item.op.equations(item.direction)
              for item in nest.body if not isinstance(item, Cluster)}
    for c in nest.hoisted:
        r.cluster(c)
    steps = 0
    for t in time_steps(nest, binding):
        r.t = t
        if trace is not None and t is not None:
            trace.append(t)
        for item in nest.body:
            if isinstance(item, Cluster):
                r.cluster(item)
            else:
                r.equations(sparse[id(item)])
        steps += 1
    return steps if nest.time is not None else 0
