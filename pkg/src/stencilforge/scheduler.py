"""Lowering of optimised expression sets to an explicit loop-nest IR.

A :class:`LoopNest` has an optional time loop, a prologue of hoisted
precomputations and an ordered body. Body items are either a
:class:`Cluster` (space loops around assignments) or a :class:`SparseItem`
(point interpolation/injection). Loop transformations return new nests;
the IR is immutable.
"""

from __future__ import annotations

import enum
import statistics
from dataclasses import dataclass, replace

from .dse import OptimizedExprSet
from .errors import HaloExceeded, ScheduleError, UnboundSpacing
from .symbolic import (Absolute, Access, Eq, Expr, Relative, Symbol, h, s,
                       preorder, substitute)

__all__ = ["TimeAxis", "Forward", "Backward", "SpaceLoop", "Cluster",
           "SparseItem", "TimeLoop", "LoopNest", "BlockingSpec", "schedule",
           "apply_blocking", "apply_dle", "autotune_blocks", "block_ranges",
           "default_candidates", "format_nest", "DLE_LEVELS"]

DLE_LEVELS = ("basic", "advanced", "speculative")
DEFAULT_BLOCK = 16


class TimeAxis(enum.Enum):
    Forward = 1
    Backward = -1

    @property
    def step(self) -> int:
        return self.value


Forward = TimeAxis.Forward
Backward = TimeAxis.Backward


@dataclass(frozen=True)
class SpaceLoop:
    dim: object
    start: int
    stop: int
    block: int = 0
    parallel: bool = False
    simd: bool = False

    @property
    def extent(self):
        return self.stop - self.start


@dataclass(frozen=True)
class Cluster:
    """Space loops around temporaries and assignments, in source order."""

    loops: tuple
    temporaries: tuple
    assignments: tuple

    @property
    def dims(self):
        return tuple(lp.dim for lp in self.loops)

    def exprs(self):
        return ([e for _, e in self.temporaries]
                + [eq.rhs for eq in self.assignments])


@dataclass(frozen=True)
class SparseItem:
    op: object  # resolved Interpolation or Injection
    direction: int

    @property
    def kind(self):
        return self.op.kind


@dataclass(frozen=True)
class TimeLoop:
    axis: TimeAxis
    moduli: tuple  # (function name, buffer count)


@dataclass(frozen=True)
class LoopNest:
    time: object  # TimeLoop or None
    hoisted: tuple
    body: tuple
    functions: tuple  # user-visible data objects, sorted by name
    scratch: tuple  # hoisted scratch functions
    scalars: tuple  # free scalar Symbols needing a binding
    dle: str = "none"

    @property
    def clusters(self):
        return [b for b in self.body if isinstance(b, Cluster)]

    @property
    def direction(self):
        return self.time.axis.step if self.time else 1


@dataclass(frozen=True)
class BlockingSpec:
    """Block size per space dimension name; 0 leaves the dimension unblocked."""

    sizes: tuple = ()

    @classmethod
    def square(cls, size, dims):
        return cls(tuple((d if isinstance(d, str) else d.name, int(size))
                         for d in dims))

    def get(self, name):
        return dict(self.sizes).get(name, 0)

    def __post_init__(self):
        if any(v < 0 for _, v in self.sizes):
            raise ValueError("block sizes must be >= 0")

    def __str__(self):
        if not any(v for _, v in self.sizes):
            return "unblocked"
        return "x".join(str(v) for _, v in self.sizes)


def block_ranges(start, stop, block):
    """Split [start, stop) into blocks of ``block`` plus a remainder."""
    if block <= 0 or block >= stop - start:
        return [(start, stop)]
    out = []
    lo = start
    while lo + block <= stop:
        out.append((lo, lo + block))
        lo += block
    if lo < stop:
        out.append((lo, stop))
    return out


# ---------------------------------------------------------------------------
# scheduling


def _accesses(exprs):
    for e in exprs:
        for n in preorder(e):
            if isinstance(n, Access):
                yield n


def _bind(e: Expr, subs) -> Expr:
    if not subs:
        return e
    names = {k if isinstance(k, str) else k.name for k in subs}
    if any(isinstance(n, Symbol) and n.name in names for n in preorder(e)):
        return substitute(e, subs)
    return e


def _check_spacing(exprs):
    for e in exprs:
        for n in preorder(e):
            if n == h or n == s:
                raise UnboundSpacing(
                    f"spacing symbol {n} has no numeric value; pass it in subs")


def _check_extent(acc: Access):
    f = acc.func
    if getattr(f, "is_sparse", False):
        return
    for i, d in zip(acc.indices, f.dimensions):
        if isinstance(i, Relative):
            limit = f.time_order if d.is_time else f.halo
            if abs(i.offset) > limit:
                kind = "time_order" if d.is_time else "halo"
                raise HaloExceeded(
                    f"{f.name}: offset {i.offset} along {d.name} exceeds "
                    f"{kind} {limit}")
        elif not d.is_time:
            n = f.grid.shape[f.grid.dimensions.index(d)]
            if not 0 <= i.value < n:
                raise HaloExceeded(
                    f"{f.name}: index {i.value} outside [0, {n}) along "
                    f"{d.name}")


def _disjoint(a: Access, b: Access) -> bool:
    """True if ``a`` and ``b`` never name the same element in one sweep."""
    nbuf = a.func.time_order + 1
    for i, j in zip(a.indices, b.indices):
        if isinstance(i, Absolute) and isinstance(j, Absolute):
            if i.value != j.value:
                return True
        elif isinstance(i, Relative) and isinstance(j, Relative):
            if i.dim.is_time and (i.offset - j.offset) % nbuf:
                return True
    return False


def _check_hazards(lhs: Access, exprs):
    for acc in _accesses(exprs):
        if acc.func is not lhs.func or acc == lhs:
            continue
        if not _disjoint(acc, lhs):
            raise ScheduleError(
                f"{lhs} is read as {acc} in the sweep that writes it")


def _reach(exprs, defs):
    out = {}
    stack, seen = list(exprs), set()
    while stack:
        e = stack.pop()
        for acc in _accesses([e]):
            for i in acc.indices:
                if isinstance(i, Relative) and not i.dim.is_time:
                    out[i.dim] = max(out.get(i.dim, 0), abs(i.offset))
            d = defs.get(acc.func)
            if d is not None and acc.func not in seen:
                seen.add(acc.func)
                stack.append(d)
    return out


def _loops(lhs: Access, exprs, defs):
    f = lhs.func
    dims = [i.dim for i in lhs.indices
            if isinstance(i, Relative) and not i.dim.is_time]
    reach = _reach(list(exprs) + [lhs], defs)
    stray = [d for d in reach if d not in dims]
    if stray:
        raise ScheduleError(
            f"{lhs}: right-hand side iterates {stray[0].name}, which the "
            f"written access does not")
    loops = []
    for d in f.grid.dimensions:
        if d in dims:
            n = f.grid.shape[f.grid.dimensions.index(d)]
            m = reach.get(d, 0)
            loops.append(SpaceLoop(d, m, n - m))
    return tuple(loops)


def _needed_temps(exprs, temps):
    names = {sym for sym, _ in temps}
    need = set()
    stack = list(exprs)
    defs = dict(temps)
    while stack:
        e = stack.pop()
        for n in preorder(e):
            if isinstance(n, Symbol) and n in names and n not in need:
                need.add(n)
                stack.append(defs[n])
    return tuple((sym, d) for sym, d in temps if sym in need)


def schedule(oset, sparse_ops=(), subs=None,
             time_axis: TimeAxis = Forward) -> LoopNest:
    oset = OptimizedExprSet.wrap(oset)
    subs = dict(subs or {})
    if isinstance(time_axis, str):
        time_axis = TimeAxis[time_axis]
    step = time_axis.step
    temps = tuple((sym, _bind(d, subs)) for sym, d in oset.temporaries)
    eqs = tuple(Eq(eq.lhs, _bind(eq.rhs, subs)) for eq in oset.assignments)
    hoisted = tuple(replace(hh, expr=_bind(hh.expr, subs))
                    for hh in oset.hoisted)
    ops = []
    for op in sparse_ops:
        op = op.resolve(step)
        op = replace(op, expr=_bind(op.expr, subs))
        op.points.stencils()  # fail fast on out-of-domain points
        ops.append(op)

    all_exprs = ([d for _, d in temps] + [eq.rhs for eq in eqs]
                 + [hh.expr for hh in hoisted]
                 + [op.expr for op in ops]
                 + [op.field for op in ops if op.kind == "inject"])
    _check_spacing(all_exprs)
    for eq in eqs:
        if not isinstance(eq.lhs, Access):
            raise ScheduleError(f"cannot assign to {eq.lhs}")
    lhs_accs = [eq.lhs for eq in eqs]
    for acc in _accesses(all_exprs + lhs_accs):
        _check_extent(acc)

    scratch = tuple(hh.func for hh in hoisted if hh.func is not None)
    defs = {hh.func: hh.expr for hh in hoisted if hh.func is not None}

    pro = []
    for hh in hoisted:
        if hh.func is None:
            pro.append(Cluster((), (), (Eq(Symbol(hh.name), hh.expr),)))
            continue
        lhs = hh.func._as_expr()
        pro.append(Cluster(_loops(lhs, [hh.expr], defs), (),
                           (Eq(lhs, hh.expr),)))

    body = []
    for eq in eqs:
        need = _needed_temps([eq.rhs], temps)
        exprs = [d for _, d in need] + [eq.rhs]
        _check_hazards(eq.lhs, exprs)
        body.append(Cluster(_loops(eq.lhs, exprs, defs), need, (eq,)))
    body.extend(SparseItem(op, step) for op in ops if op.kind == "inject")
    body.extend(SparseItem(op, step) for op in ops
                if op.kind == "interpolate")

    funcs, scalars = {}, set()
    internal = {sym for sym, _ in temps} | {Symbol(hh.name) for hh in hoisted}
    for e in all_exprs + lhs_accs:
        for n in preorder(e):
            if isinstance(n, Access) and n.func not in scratch:
                funcs.setdefault(n.func.name, n.func)
            elif isinstance(n, Symbol) and n not in internal:
                scalars.add(n)
    for op in ops:
        funcs.setdefault(op.points.name, op.points)
    for name in funcs:
        if sum(1 for f in funcs.values() if f.name == name) > 1:
            raise ScheduleError(f"two data objects share the name {name!r}")
    functions = tuple(funcs[k] for k in sorted(funcs))

    tv = [f for f in functions if f.time_varying]
    time = None
    if tv:
        time = TimeLoop(time_axis, tuple(
            (f.name, f.time_order + 1) for f in tv
            if not getattr(f, "is_sparse", False)))
    return LoopNest(time, tuple(pro), tuple(body), functions, scratch,
                    tuple(sorted(scalars, key=lambda v: v.name)))


# ---------------------------------------------------------------------------
# loop-level transformations


def _map_clusters(nest, fn, hoisted=False):
    body = tuple(fn(b) if isinstance(b, Cluster) else b for b in nest.body)
    pro = tuple(fn(c) for c in nest.hoisted) if hoisted else nest.hoisted
    return replace(nest, body=body, hoisted=pro)


def apply_blocking(nest: LoopNest, spec: BlockingSpec) -> LoopNest:
    """Tile loops of every multi-dimensional cluster per ``spec``."""

    def fn(c):
        if len(c.loops) < 2:
            return c
        loops = []
        for lp in c.loops:
            b = spec.get(lp.dim.name)
            if b >= lp.extent:
                b = 0
            loops.append(replace(lp, block=b))
        return replace(c, loops=tuple(loops))

    return _map_clusters(nest, fn)


def apply_dle(nest: LoopNest, level: str = "advanced",
              block: int = DEFAULT_BLOCK) -> LoopNest:
    """Annotate loops for a DLE level.

    basic: parallel outermost loop. advanced: also tile every
    non-innermost dimension and mark the innermost loop SIMD.
    speculative: as advanced; differs only in the emitted C.
    """
    if level not in DLE_LEVELS:
        raise ValueError(f"unknown DLE level {level!r}")

    def fn(c):
        if not c.loops:
            return c
        loops = list(c.loops)
        loops[0] = replace(loops[0], parallel=True)
        if level != "basic":
            loops[-1] = replace(loops[-1], simd=True)
        return replace(c, loops=tuple(loops))

    out = _map_clusters(nest, fn, hoisted=True)
    if level != "basic":
        dims = {lp.dim.name: None for c in out.clusters
                for lp in c.loops[:-1]}
        out = apply_blocking(out, BlockingSpec.square(block, list(dims)))
    return replace(out, dle=level)


def default_candidates(nest: LoopNest):
    """Unblocked plus square blocks of 8..64, capped by the loop extents."""
    dims = []
    extent = 0
    for c in nest.clusters:
        if len(c.loops) >= 2:
            for lp in c.loops[:-1]:
                if lp.dim.name not in dims:
                    dims.append(lp.dim.name)
                extent = max(extent, lp.extent)
    out = [BlockingSpec.square(0, dims)]
    for b in (8, 16, 32, 64):
        if b < extent:
            out.append(BlockingSpec.square(b, dims))
    return out


def autotune_blocks(nest: LoopNest, runner, candidates=None):
    """Return the candidate with the lowest median of ``runner(nest)``.

    ``runner`` returns a list of timings for one blocked nest. Also
    returns the per-candidate medians.
    """
    if candidates is None:
        candidates = default_candidates(nest)
    candidates = list(candidates)
    if len(candidates) == 1:
        return candidates[0], {str(candidates[0]): None}
    medians = {}
    best, best_t = None, None
    for spec in candidates:
        tm = statistics.median(runner(apply_blocking(nest, spec)))
        medians[str(spec)] = tm
        if best_t is None or tm < best_t:
            best, best_t = spec, tm
    return best, medians


# ---------------------------------------------------------------------------
# printing


def _fmt_loop(lp):
    tags = []
    if lp.parallel:
        tags.append("parallel")
    if lp.simd:
        tags.append("simd")
    head = " ".join(tags + ["for"])
    blk = f" block {lp.block}" if lp.block else ""
    return f"{head} {lp.dim.name} in [{lp.start}, {lp.stop}){blk}"


def _fmt_cluster(c, pad):
    lines = []
    for lp in c.loops:
        lines.append(pad + _fmt_loop(lp))
        pad += "  "
    for sym, d in c.temporaries:
        lines.append(f"{pad}{sym} = {d}")
    for eq in c.assignments:
        lines.append(f"{pad}{eq.lhs} = {eq.rhs}")
    return lines


def format_nest(nest: LoopNest) -> str:
    lines = []
    if nest.hoisted:
        lines.append("hoisted:")
        for c in nest.hoisted:
            lines.extend(_fmt_cluster(c, "  "))
    pad = ""
    if nest.time:
        mods = ", ".join(f"{n}:{k}" for n, k in nest.time.moduli)
        lines.append(f"time {nest.time.axis.name} (buffers {mods}):")
        pad = "  "
    for item in nest.body:
        if isinstance(item, Cluster):
            lines.extend(_fmt_cluster(item, pad))
        elif item.kind == "inject":
            lines.append(f"{pad}inject {item.op.points.name} into "
                         f"{item.op.field} += {item.op.expr}")
        else:
            lines.append(f"{pad}interpolate {item.op.expr} into "
                         f"{item.op.points.name}")
    return "\n".join(lines) + "\n"
