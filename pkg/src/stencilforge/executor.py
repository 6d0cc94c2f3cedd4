"""Execution of compiled kernel sets.

Clusters run their tapes over rectangular boxes with numpy slices (one box
per block, or per thread chunk of the outermost parallel loop). Sparse
items run single-threaded with gathers and an ordered scatter-add.
``mode="point"`` evaluates the same tapes one point at a time through the
precomputed linear offsets.
"""

from __future__ import annotations

import itertools
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .binding import array_for, time_steps
from .interpreter import evaluate
from .scheduler import SparseItem, block_ranges
from .symbolic import Relative
from .tape import ClusterKernel, KernelSet, slot_key

__all__ = ["RunSummary", "run", "thread_count"]


def thread_count(value=None) -> int:
    """Worker count: argument, else STENCILFORGE_THREADS (0 = all cores), else 1."""
    if value is None:
        raw = os.environ.get("STENCILFORGE_THREADS")
        if raw is None or raw.strip() == "":
            return 1
        value = int(raw)
    if value < 0:
        raise ValueError("thread count must be >= 0")
    return value or (os.cpu_count() or 1)


@dataclass
class RunSummary:
    elapsed: float
    steps: int
    threads: int


class _BoxCtx:
    __slots__ = ("arrs", "lo", "hi", "scalars", "cast")

    def __init__(self, arrs, lo, hi, scalars, cast):
        self.arrs, self.lo, self.hi = arrs, lo, hi
        self.scalars, self.cast = scalars, cast

    def load(self, ref):
        v = self.arrs[ref.slot][ref.box_index(self.lo, self.hi)]
        if None in ref.expand:
            v = v[ref.expand]
        return v

    def store(self, ref, val):
        self.arrs[ref.slot][ref.box_index(self.lo, self.hi)] = val

    def scalar(self, name):
        return self.scalars[name]

    def store_scalar(self, name, val):
        self.scalars[name] = self.cast(val)


class _PointCtx(_BoxCtx):
    __slots__ = ("point",)

    def __init__(self, arrs, scalars, cast):
        super().__init__([a.reshape(-1) for a in arrs], (), (), scalars, cast)
        self.point = ()

    def load(self, ref):
        return self.arrs[ref.slot][ref.point_index(self.point)]

    def store(self, ref, val):
        self.arrs[ref.slot][ref.point_index(self.point)] = val


def _boxes(loops, threads):
    ranges = []
    for k, lp in enumerate(loops):
        r = block_ranges(lp.start, lp.stop, lp.block)
        if k == 0 and lp.parallel and threads > 1 and len(r) == 1:
            edges = np.linspace(lp.start, lp.stop, threads + 1).astype(int)
            r = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        ranges.append(r)
    for combo in itertools.product(*ranges):
        yield tuple(a for a, _ in combo), tuple(b for _, b in combo)


def _run_tapes(k, ctx):
    temps = [None] * k.ntemps
    for tp in k.tapes:
        tp.execute(ctx, temps)


def _exec_cluster(k: ClusterKernel, arrays, scalars, t, cast, threads, pool,
                  mode):
    arrs = [array_for(key, arrays, t) for key in k.slots]
    if mode == "point":
        ctx = _PointCtx(arrs, scalars, cast)
        ranges = [range(lp.start, lp.stop) for lp in k.loops]
        for pt in itertools.product(*ranges):
            ctx.point = pt
            _run_tapes(k, ctx)
        return
    if not k.loops:
        _run_tapes(k, _BoxCtx(arrs, (), (), scalars, cast))
        return
    boxes = list(_boxes(k.loops, threads))

    def one(box):
        _run_tapes(k, _BoxCtx(arrs, box[0], box[1], scalars, cast))

    if pool is not None and len(boxes) > 1 and k.loops[0].parallel:
        list(pool.map(one, boxes))
    else:
        for box in boxes:
            one(box)


class _SparsePlan:
    """Gather/scatter indices for one sparse item, fixed for a run."""

    def __init__(self, item: SparseItem, dtype):
        self.op = item.op
        sts = self.op.points.stencils()
        ndim = self.op.points.grid.ndim
        self.nodes = np.array([st.nodes() for st in sts],
                              dtype=np.intp).reshape(len(sts), -1, ndim)
        self.w = np.array([st.weights for st in sts]).astype(dtype)

    def _index(self, acc, nodes, pids):
        f = acc.func
        idx = acc.indices[1:] if f.time_varying else acc.indices
        if getattr(f, "is_sparse", False):
            i = idx[0]
            return (pids if isinstance(i, Relative) else i.value,)
        out = []
        for i in idx:
            if isinstance(i, Relative):
                ax = f.grid.dimensions.index(i.dim)
                out.append(nodes[:, ax] + i.offset)
            else:
                out.append(i.value)
        return tuple(out)

    def run(self, arrays, scalars, t, cast):
        op = self.op
        npt, ncorner, ndim = self.nodes.shape

        def loader(nodes, pids):
            def load(acc):
                arr = array_for(slot_key(acc), arrays, t)
                return arr[self._index(acc, nodes, pids)]
            return load

        if op.kind == "inject":
            nodes = self.nodes.reshape(-1, ndim)
            pids = np.repeat(np.arange(npt), ncorner)
            val = evaluate(op.expr, loader(nodes, pids), scalars.__getitem__,
                           None, cast)
            v = np.broadcast_to(self.w.reshape(-1) * val, (npt * ncorner,))
            arr = array_for(slot_key(op.field), arrays, t)
            np.add.at(arr, self._index(op.field, nodes, pids), v)
            return
        pids = np.arange(npt)
        acc = None
        for c in range(ncorner):
            val = evaluate(op.expr, loader(self.nodes[:, c, :], pids),
                           scalars.__getitem__, None, cast)
            term = self.w[:, c] * val
            acc = term if acc is None else acc + term
        target = op.target
        arr = array_for(slot_key(target), arrays, t)
        arr[self._index(target, None, pids)] = acc


def run(kernels: KernelSet, binding, threads=None, trace=None,
        mode: str = "vector") -> RunSummary:
    """Execute hoisted phase, then every time step's body in order."""
    if mode not in ("vector", "point"):
        raise ValueError(f"unknown execution mode {mode!r}")
    nest = kernels.nest
    cast = kernels.dtype.type
    nthreads = thread_count(threads)
    arrays, scalars = binding.arrays, binding.scalars
    plans = {id(item): _SparsePlan(item, kernels.dtype)
             for item in kernels.body if isinstance(item, SparseItem)}
    pool = ThreadPoolExecutor(nthreads) if nthreads > 1 else None
    start = _time.perf_counter()
    steps = 0
    try:
        for k in kernels.hoisted:
            _exec_cluster(k, arrays, scalars, None, cast, nthreads, pool,
                          mode)
        for t in time_steps(nest, binding):
            if trace is not None and t is not None:
                trace.append(t)
            for item in kernels.body:
                if isinstance(item, ClusterKernel):
                    _exec_cluster(item, arrays, scalars, t, cast, nthreads,
                                  pool, mode)
                else:
                    plans[id(item)].run(arrays, scalars, t, cast)
            steps += 1
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = _time.perf_counter() - start
    if nest.time is None:
        steps = 0
    return RunSummary(elapsed, steps, nthreads)
