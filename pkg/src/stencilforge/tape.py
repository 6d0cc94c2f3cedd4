"""Flat stack-machine tapes compiled from scheduled clusters.

Operation order mirrors the reference interpreter exactly: sums and
products fold left to right, a negative-coefficient summand becomes a
subtraction of its positive form, a leading -1 factor becomes a sign flip
and integer powers are repeated multiplication. Results of the two are
therefore bit-identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dse import _neg_rest
from .errors import StackOverflowBound
from .scheduler import Cluster, LoopNest
from .symbolic import (Absolute, Access, Add, Const, Deriv, Div, Expr, Mul,
                       Pow, Relative, Symbol)

__all__ = ["Op", "GridRef", "KernelTape", "ClusterKernel", "KernelSet",
           "compile_nest", "compile_expr", "DEFAULT_STACK_BOUND"]

DEFAULT_STACK_BOUND = 64


class Op(enum.IntEnum):
    LOAD_GRID = 0
    LOAD_SCALAR = 1
    LOAD_CONST = 2
    LOAD_TEMP = 3
    ADD = 4
    SUB = 5
    MUL = 6
    DIV = 7
    NEG = 8
    DUP = 9
    STORE = 10
    STORE_TEMP = 11
    STORE_SCALAR = 12


ARITH = {Op.ADD: "adds", Op.SUB: "adds", Op.MUL: "muls", Op.DIV: "divs"}


def slot_key(acc: Access):
    """(function, time spec) naming one physical array per time step."""
    f = acc.func
    if not f.time_varying:
        return (f, None)
    i = acc.indices[0]
    return (f, ("r", i.offset) if isinstance(i, Relative) else ("a", i.value))


@dataclass(frozen=True)
class GridRef:
    """One array access relative to the current point or box.

    ``index`` has one entry per space dimension of the function:
    ``("r", loop_axis, offset)`` or ``("a", value)``. ``expand`` inserts
    broadcast axes for loop dimensions the function lacks. ``rel`` and
    ``delta`` give the linear element index for point evaluation:
    sum(stride * point[axis] for axis, stride in rel) + delta.
    """

    slot: int
    index: tuple
    expand: tuple
    rel: tuple
    delta: int

    def box_index(self, lo, hi):
        out = []
        for item in self.index:
            if item[0] == "r":
                _, ax, k = item
                out.append(slice(lo[ax] + k, hi[ax] + k))
            else:
                out.append(item[1])
        return tuple(out)

    def point_index(self, point):
        return sum(st * point[ax] for ax, st in self.rel) + self.delta


def _strides(shape):
    out = []
    acc = 1
    for n in reversed(shape):
        out.append(acc)
        acc *= n
    return tuple(reversed(out))


class _Builder:
    def __init__(self, loop_dims, slots, temps, dtype, bound):
        self.loop_dims = tuple(loop_dims)
        self.slots = slots  # list of slot keys, shared per cluster
        self.temps = temps  # Symbol -> temp id
        self.dtype = dtype
        self.bound = bound
        self.code = []
        self.depth = 0
        self.max_depth = 0

    def _push(self, n=1):
        self.depth += n
        if self.depth > self.bound:
            raise StackOverflowBound(
                f"expression needs a stack deeper than {self.bound}")
        self.max_depth = max(self.max_depth, self.depth)

    def _pop(self, n=1):
        self.depth -= n

    def ref(self, acc: Access) -> GridRef:
        key = slot_key(acc)
        if key not in self.slots:
            self.slots.append(key)
        slot = self.slots.index(key)
        f = acc.func
        idx = acc.indices[1:] if f.time_varying else acc.indices
        dims = f.dimensions[1:] if f.time_varying else f.dimensions
        strides = _strides(f.shape)
        index, rel, present = [], [], set()
        delta = 0
        for i, d, st in zip(idx, dims, strides):
            if isinstance(i, Relative):
                if d not in self.loop_dims:
                    raise ValueError(f"{acc}: {d.name} is not a loop dimension")
                ax = self.loop_dims.index(d)
                index.append(("r", ax, i.offset))
                rel.append((ax, st))
                present.add(ax)
                delta += st * i.offset
            else:
                index.append(("a", i.value))
                delta += st * i.value
        expand = tuple(slice(None) if ax in present else None
                       for ax in range(len(self.loop_dims)))
        return GridRef(slot, tuple(index), expand, tuple(rel), delta)

    def emit(self, e: Expr):
        code = self.code
        if isinstance(e, Const):
            code.append((Op.LOAD_CONST, self.dtype.type(e.value)))
            self._push()
        elif isinstance(e, Symbol):
            if e in self.temps:
                code.append((Op.LOAD_TEMP, self.temps[e]))
            else:
                code.append((Op.LOAD_SCALAR, e.name))
            self._push()
        elif isinstance(e, Access):
            code.append((Op.LOAD_GRID, self.ref(e)))
            self._push()
        elif isinstance(e, Add):
            self.emit(e.args[0])
            for a in e.args[1:]:
                pos = _neg_rest(a)
                self.emit(a if pos is None else pos)
                code.append((Op.ADD if pos is None else Op.SUB, None))
                self._pop()
        elif isinstance(e, Mul):
            ops = e.args
            neg = isinstance(ops[0], Const) and ops[0].value == -1.0
            if neg:
                ops = ops[1:]
            self.emit(ops[0])
            for a in ops[1:]:
                self.emit(a)
                code.append((Op.MUL, None))
                self._pop()
            if neg:
                code.append((Op.NEG, None))
        elif isinstance(e, Div):
            self.emit(e.num)
            self.emit(e.den)
            code.append((Op.DIV, None))
            self._pop()
        elif isinstance(e, Pow):
            if e.exp == 0:
                code.append((Op.LOAD_CONST, self.dtype.type(1.0)))
                self._push()
                return
            self.emit(e.base)
            for _ in range(e.exp - 1):
                code.append((Op.DUP, None))
                self._push()
            for _ in range(e.exp - 1):
                code.append((Op.MUL, None))
                self._pop()
        elif isinstance(e, Deriv):
            raise ValueError("cannot compile an unexpanded derivative")
        else:
            raise TypeError(type(e))


@dataclass(frozen=True)
class KernelTape:
    code: tuple
    depth: int

    @property
    def target(self):
        return self.code[-1][1]

    def op_counts(self):
        out = {"adds": 0, "muls": 0, "divs": 0}
        for op, _ in self.code:
            if op in ARITH:
                out[ARITH[op]] += 1
        return out

    def execute(self, ctx, temps):
        """Run on ``ctx`` (box or point evaluation context)."""
        stack = []
        push, pop = stack.append, stack.pop
        for op, arg in self.code:
            if op is Op.LOAD_GRID:
                push(ctx.load(arg))
            elif op is Op.LOAD_CONST:
                push(arg)
            elif op is Op.LOAD_TEMP:
                push(temps[arg])
            elif op is Op.LOAD_SCALAR:
                push(ctx.scalar(arg))
            elif op is Op.ADD:
                b = pop()
                push(pop() + b)
            elif op is Op.SUB:
                b = pop()
                push(pop() - b)
            elif op is Op.MUL:
                b = pop()
                push(pop() * b)
            elif op is Op.DIV:
                b = pop()
                push(pop() / b)
            elif op is Op.NEG:
                push(-pop())
            elif op is Op.DUP:
                push(stack[-1])
            elif op is Op.STORE:
                ctx.store(arg, pop())
            elif op is Op.STORE_TEMP:
                temps[arg] = pop()
            elif op is Op.STORE_SCALAR:
                ctx.store_scalar(arg, pop())

    def __str__(self):
        parts = []
        for op, arg in self.code:
            if op is Op.LOAD_GRID:
                parts.append(f"{op.name} {arg.slot}{{{arg.delta:+d}}}")
            elif arg is None:
                parts.append(op.name)
            else:
                parts.append(f"{op.name} {arg}")
        return "; ".join(parts)


@dataclass(frozen=True)
class ClusterKernel:
    cluster: Cluster
    slots: tuple  # (function, time spec) per array slot
    tapes: tuple  # temporaries first, then assignments
    ntemps: int

    @property
    def loops(self):
        return self.cluster.loops


@dataclass(frozen=True)
class KernelSet:
    nest: LoopNest
    hoisted: tuple
    body: tuple  # ClusterKernel or SparseItem
    dtype: np.dtype

    @property
    def tapes(self):
        return [tp for k in self.body if isinstance(k, ClusterKernel)
                for tp in k.tapes]


def compile_expr(e: Expr, loop_dims=(), dtype=np.float64,
                 bound=DEFAULT_STACK_BOUND, slots=None, temps=None):
    """Compile a single expression; the tape leaves its value on the stack."""
    b = _Builder(loop_dims, [] if slots is None else slots, temps or {},
                 np.dtype(dtype), bound)
    b.emit(e)
    return KernelTape(tuple(b.code), b.max_depth), b


def compile_cluster(c: Cluster, dtype, bound=DEFAULT_STACK_BOUND):
    slots = []
    temps = {sym: k for k, (sym, _) in enumerate(c.temporaries)}
    dims = c.dims
    tapes = []
    for k, (sym, d) in enumerate(c.temporaries):
        b = _Builder(dims, slots, temps, dtype, bound)
        b.emit(d)
        b.code.append((Op.STORE_TEMP, k))
        tapes.append(KernelTape(tuple(b.code), b.max_depth))
    for eq in c.assignments:
        b = _Builder(dims, slots, temps, dtype, bound)
        b.emit(eq.rhs)
        if isinstance(eq.lhs, Symbol):
            b.code.append((Op.STORE_SCALAR, eq.lhs.name))
        else:
            b.code.append((Op.STORE, b.ref(eq.lhs)))
        tapes.append(KernelTape(tuple(b.code), b.max_depth))
    return ClusterKernel(c, tuple(slots), tuple(tapes), len(c.temporaries))


def compile_nest(nest: LoopNest, dtype=np.float64,
                 bound: int = DEFAULT_STACK_BOUND) -> KernelSet:
    """One tape per temporary and per assignment of every cluster."""
    dtype = np.dtype(dtype)
    pro = tuple(compile_cluster(c, dtype, bound) for c in nest.hoisted)
    body = tuple(compile_cluster(b, dtype, bound) if isinstance(b, Cluster)
                 else b for b in nest.body)
    return KernelSet(nest, pro, body, dtype)
