"""C source emission for scheduled loop nests.

The output is a deterministic, self-contained C99 translation unit with a
single entry point. It mirrors the loop nest exactly (bounds, blocking with
``MIN`` remainders, OpenMP pragmas) but is an artifact only: execution
happens through the tapes.
"""

from __future__ import annotations

import numpy as np

from .dse import _neg_rest
from .scheduler import Cluster, LoopNest
from .symbolic import (Absolute, Access, Add, Const, Div, Mul, Pow, Relative,
                       Symbol)

__all__ = ["emit_c"]


def _ctype(dtype):
    return {np.dtype(np.float64): "double",
            np.dtype(np.float32): "float"}[np.dtype(dtype)]


def _time_var(k: int, nbuf: int, multi: bool):
    name = "tc" if k == 0 else (f"tp{k}" if k > 0 else f"tm{-k}")
    return f"{name}_{nbuf}" if multi else name


class _Printer:
    def __init__(self, dtype, nest, index_of=None):
        self.suffix = "F" if np.dtype(dtype) == np.float32 else ""
        self.multi = len({n for _, n in nest.time.moduli}) > 1 if nest.time \
            else False
        self.index_of = index_of  # custom mapping for sparse code

    def const(self, v):
        text = repr(float(v))
        if "e" not in text and "." not in text and "inf" not in text:
            text += ".0"
        return text + self.suffix

    def access(self, acc: Access):
        f = acc.func
        parts = []
        for i, d in zip(acc.indices, f.dimensions):
            if d.is_time:
                if getattr(f, "is_sparse", False):
                    k = i.offset if isinstance(i, Relative) else None
                    parts.append("time" if k == 0 else
                                 f"time + {k}" if k and k > 0 else
                                 f"time - {-k}" if k else str(i.value))
                elif isinstance(i, Relative):
                    parts.append(_time_var(i.offset, f.time_order + 1,
                                           self.multi))
                else:
                    parts.append(str(i.value % (f.time_order + 1)))
                continue
            if self.index_of is not None:
                got = self.index_of(acc, i, d)
                if got is not None:
                    parts.append(got)
                    continue
            if isinstance(i, Absolute):
                parts.append(str(i.value))
            elif i.offset == 0:
                parts.append(d.name)
            elif i.offset > 0:
                parts.append(f"{d.name} + {i.offset}")
            else:
                parts.append(f"{d.name} - {-i.offset}")
        return f.name + "".join(f"[{p}]" for p in parts)

    def expr(self, e, prec=0):
        # 1 sum, 2 product left operand, 3 product right operand / atom
        if isinstance(e, Const):
            text = self.const(e.value)
            return f"({text})" if e.value < 0 and prec > 0 else text
        if isinstance(e, Symbol):
            return e.name
        if isinstance(e, Access):
            return self.access(e)
        if isinstance(e, Add):
            out = self.expr(e.args[0], 1)
            for a in e.args[1:]:
                pos = _neg_rest(a)
                if pos is None:
                    out += " + " + self.expr(a, 2)
                else:
                    out += " - " + self.expr(pos, 2)
            return f"({out})" if prec > 1 else out
        if isinstance(e, Mul):
            ops = e.args
            neg = isinstance(ops[0], Const) and ops[0].value == -1.0
            if neg:
                ops = ops[1:]
            out = self.expr(ops[0], 2)
            for a in ops[1:]:
                out += "*" + self.expr(a, 3)
            if neg:
                return f"(-{out})" if len(ops) > 1 or prec > 0 else f"-{out}"
            return f"({out})" if prec > 2 else out
        if isinstance(e, Div):
            out = f"{self.expr(e.num, 2)}/{self.expr(e.den, 3)}"
            return f"({out})" if prec > 2 else out
        if isinstance(e, Pow):
            if e.exp == 0:
                return self.const(1.0)
            base = self.expr(e.base, 3)
            out = "*".join([base] * e.exp)
            return f"({out})" if e.exp > 1 and prec > 2 else out
        raise TypeError(type(e))


def _shape_suffix(shape):
    return "".join(f"[{n}]" for n in shape)


def _view(ctype, name, shape, const=""):
    if not shape:
        return (f"{const}{ctype} *restrict {name} = "
                f"({const}{ctype} *) {name}_vec;")
    sfx = _shape_suffix(shape)
    return (f"{const}{ctype} (*restrict {name}){sfx} = "
            f"({const}{ctype} (*){sfx}) {name}_vec;")


def _loop_lines(loops, pad, options):
    """Open the loops of a cluster; returns (lines, inner pad, depth)."""
    lines = []
    depth = 0
    blocked = [lp for lp in loops if lp.block]
    first = True
    for lp in blocked:
        if first and lp is loops[0] and lp.parallel:
            lines.append(f"{pad}#pragma omp parallel for schedule(static)")
        first = False
        b = f"{lp.dim.name}_blk"
        lines.append(f"{pad}for (int {b} = {lp.start}; {b} < {lp.stop}; "
                     f"{b} += {lp.block})")
        lines.append(pad + "{")
        pad += "  "
        depth += 1
    for k, lp in enumerate(loops):
        d = lp.dim.name
        par = k == 0 and lp.parallel and not blocked
        if par and lp.simd:
            lines.append(f"{pad}#pragma omp parallel for simd "
                         f"schedule(static)")
        elif par:
            lines.append(f"{pad}#pragma omp parallel for schedule(static)")
        elif lp.simd:
            lines.append(f"{pad}#pragma omp simd")
        if lp.simd and options.get("speculative"):
            lines.append(f"{pad}/* speculative: request non-temporal "
                         f"stores and padded rows */")
        if lp.block:
            b = f"{d}_blk"
            lines.append(f"{pad}for (int {d} = {b}; {d} < MIN({b} + "
                         f"{lp.block}, {lp.stop}); {d} += 1)")
        else:
            lines.append(f"{pad}for (int {d} = {lp.start}; {d} < {lp.stop}; "
                         f"{d} += 1)")
        lines.append(pad + "{")
        pad += "  "
        depth += 1
    return lines, pad, depth


def _close(lines, pad, depth):
    for _ in range(depth):
        pad = pad[:-2]
        lines.append(pad + "}")
    return pad


def _cluster_lines(c: Cluster, pr: _Printer, ctype, pad, options):
    lines, inner, depth = _loop_lines(c.loops, pad, options)
    for sym, d in c.temporaries:
        lines.append(f"{inner}const {ctype} {sym.name} = {pr.expr(d)};")
    for eq in c.assignments:
        if isinstance(eq.lhs, Symbol):
            lines.append(f"{inner}const {ctype} {eq.lhs.name} = "
                         f"{pr.expr(eq.rhs)};")
        else:
            lines.append(f"{inner}{pr.access(eq.lhs)} = {pr.expr(eq.rhs)};")
    _close(lines, inner, depth)
    return lines


def _sparse_lines(item, nest, ctype, pad, dtype):
    op = item.op
    pts = op.points
    g = pts.grid
    dims = [d.name for d in g.dimensions]
    nd = len(dims)
    lines = [f"{pad}/* {op.kind} {pts.name} */",
             f"{pad}for (int p = 0; p < {pts.npoint}; p += 1)", pad + "{"]
    ip = pad + "  "
    pr0 = _Printer(dtype, nest)
    for k, d in enumerate(dims):
        hh = pr0.const(g.spacing[k])
        top = g.shape[k] - 2
        lines.append(f"{ip}const {ctype} r{d} = {pts.name}_coords[p][{k}]"
                     f"/{hh};")
        lines.append(f"{ip}int i{d} = (int) floor(r{d});")
        lines.append(f"{ip}if (i{d} > {top}) i{d} = {top};")
        lines.append(f"{ip}const {ctype} f{d} = r{d} - i{d};")
    corners = []
    for n in range(2 ** nd):
        corner = tuple((n >> (nd - 1 - k)) & 1 for k in range(nd))
        corners.append(corner)
    one = pr0.const(1.0)
    for n, corner in enumerate(corners):
        factors = [f"f{d}" if c else f"({one} - f{d})"
                   for d, c in zip(dims, corner)]
        lines.append(f"{ip}const {ctype} w{n} = {'*'.join(factors)};")

    def index_for(corner):
        def index_of(acc, i, d):
            if d == pts.point_dim or (getattr(acc.func, "is_sparse", False)
                                      and not d.is_time):
                return "p" if isinstance(i, Relative) else str(i.value)
            if isinstance(i, Relative) and d.name in dims:
                k = dims.index(d.name)
                off = corner[k] + i.offset
                if off == 0:
                    return f"i{d.name}"
                return (f"i{d.name} + {off}" if off > 0
                        else f"i{d.name} - {-off}")
            return None
        return index_of

    if op.kind == "inject":
        for n, corner in enumerate(corners):
            pr = _Printer(dtype, nest, index_for(corner))
            lines.append(f"{ip}{pr.access(op.field)} += "
                         f"w{n}*{pr.expr(op.expr, 3)};")
    else:
        terms = []
        for n, corner in enumerate(corners):
            pr = _Printer(dtype, nest, index_for(corner))
            terms.append(f"w{n}*{pr.expr(op.expr, 3)}")
        pr = _Printer(dtype, nest, index_for(corners[0]))
        lines.append(f"{ip}{pr.access(op.target)} = {' + '.join(terms)};")
    lines.append(pad + "}")
    return lines


def emit_c(nest: LoopNest, name="kernel", dtype=np.float64, dse=None) -> str:
    """Emit C source for ``nest``; identical input gives identical bytes."""
    ctype = _ctype(dtype)
    options = {"speculative": nest.dle == "speculative"}
    pr = _Printer(dtype, nest)
    out = ["#include <math.h>", "#include <stdlib.h>", "",
           "#define MIN(a, b) ((a) < (b) ? (a) : (b))", "",
           f"/* {name}: dse={dse or 'unknown'} dle={nest.dle} */"]
    params = []
    for f in nest.functions:
        params.append(f"{ctype} *restrict {f.name}_vec")
        if getattr(f, "is_sparse", False):
            params.append(f"const double *restrict {f.name}_coords_vec")
    params += [f"const {ctype} {sym.name}" for sym in nest.scalars]
    if nest.time:
        params += ["const int time_m", "const int time_M"]
    out.append(f"int {name}(" + ", ".join(params) + ")")
    out.append("{")
    pad = "  "
    for f in nest.functions:
        out.append(pad + _view(ctype, f.name, f.data.shape[1:]))
        if getattr(f, "is_sparse", False):
            out.append(pad + _view("double", f"{f.name}_coords",
                                   (f.grid.ndim,), "const "))
    for f in nest.scratch:
        shape = f.data.shape
        size = " * ".join(str(n) for n in shape)
        out.append(f"{pad}{ctype} *{f.name}_vec = ({ctype} *) "
                   f"malloc(sizeof({ctype}) * {size});")
        out.append(pad + _view(ctype, f.name, shape[1:]))
    if nest.hoisted:
        out.append("")
        out.append(f"{pad}/* time-invariant precomputation */")
        for c in nest.hoisted:
            out.extend(_cluster_lines(c, pr, ctype, pad, options))
    out.append("")
    if nest.time:
        step = nest.time.axis.step
        if step > 0:
            out.append(f"{pad}for (int time = time_m; time < time_M; "
                       f"time += 1)")
        else:
            out.append(f"{pad}for (int time = time_M - 1; time >= time_m; "
                       f"time -= 1)")
        out.append(pad + "{")
        pad += "  "
        offsets = sorted({(i.offset, f.time_order + 1)
                          for c in nest.clusters
                          for e in c.exprs() + [eq.lhs for eq in c.assignments]
                          for f, i in _time_indices(e)}
                         | {(i.offset, f.time_order + 1)
                            for item in nest.body if not isinstance(item, Cluster)
                            for e in _sparse_exprs(item)
                            for f, i in _time_indices(e)})
        for k, nbuf in offsets:
            var = _time_var(k, nbuf, pr.multi)
            if k >= 0 and step > 0:
                val = f"(time + {k}) % {nbuf}" if k else f"time % {nbuf}"
            else:
                sh = f"time + {k}" if k > 0 else (f"time - {-k}" if k else
                                                  "time")
                val = f"(({sh}) % {nbuf} + {nbuf}) % {nbuf}"
            out.append(f"{pad}const int {var} = {val};")
    for item in nest.body:
        if isinstance(item, Cluster):
            out.extend(_cluster_lines(item, pr, ctype, pad, options))
        else:
            out.extend(_sparse_lines(item, nest, ctype, pad, dtype))
    if nest.time:
        pad = pad[:-2]
        out.append(pad + "}")
    for f in nest.scratch:
        out.append(f"{pad}free({f.name}_vec);")
    out.append(f"{pad}return 0;")
    out.append("}")
    return "\n".join(out) + "\n"


def _time_indices(e):
    from .symbolic import preorder

    for n in preorder(e):
        if (isinstance(n, Access) and n.func.time_varying
                and not getattr(n.func, "is_sparse", False)
                and isinstance(n.indices[0], Relative)):
            yield n.func, n.indices[0]


def _sparse_exprs(item):
    op = item.op
    return [op.expr, op.field] if op.kind == "inject" else [op.expr]
