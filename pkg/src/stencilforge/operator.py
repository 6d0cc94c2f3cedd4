"""The user-facing compiler driver.

``Operator(exprs, subs=..., time_axis=..., dse=..., dle=...)`` discretises,
optimises, schedules and compiles a list of assignments and sparse
operations; calling it runs the kernel on data bound by name.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .binding import bind
from .dse import DSE_LEVELS, OptimizedExprSet, flop_count, optimize
from .executor import run
from .finite_difference import expand_derivatives
from .interpreter import run_reference
from .scheduler import (DLE_LEVELS, Forward, TimeAxis,
                        apply_blocking, apply_dle, autotune_blocks,
                        format_nest, schedule)
from .sparse import Injection, Interpolation
from .symbolic import Access, Eq, preorder, simplify, substitute
from .tape import DEFAULT_STACK_BOUND, compile_nest

__all__ = ["Operator"]


def _flatten(items):
    for it in items:
        if isinstance(it, (list, tuple)):
            yield from _flatten(it)
        else:
            yield it


def _discretize(eq: Eq, subs) -> Eq:
    if not isinstance(eq.lhs, Access):
        raise TypeError(f"assignment target must be a grid access: {eq.lhs}")
    rhs = expand_derivatives(eq.rhs)
    rhs = substitute(rhs, subs) if subs else simplify(rhs)
    return Eq(eq.lhs, rhs)


class Operator:
    """Compiled stencil kernel.

    ``dse`` is "basic", "advanced" or "none" (no symbolic passes); ``dle``
    is "basic", "advanced" or "speculative".
    """

    def __init__(self, expressions, subs=None, time_axis=Forward,
                 dse="advanced", dle="advanced", name="kernel",
                 stack_bound=DEFAULT_STACK_BOUND):
        if not isinstance(expressions, (list, tuple)):
            expressions = [expressions]
        if isinstance(time_axis, str):
            time_axis = TimeAxis[time_axis]
        if dse not in DSE_LEVELS + ("none",):
            raise ValueError(f"unknown DSE level {dse!r}")
        if dle not in DLE_LEVELS:
            raise ValueError(f"unknown DLE level {dle!r}")
        self.name = name
        self.subs = dict(subs or {})
        self.time_axis = time_axis
        self.dse, self.dle = dse, dle
        self.stack_bound = stack_bound
        eqs, sparse = [], []
        for item in _flatten(expressions):
            if isinstance(item, Eq):
                eqs.append(item)
            elif isinstance(item, (Interpolation, Injection)):
                sparse.append(item)
            else:
                raise TypeError(f"cannot build an operator from {item!r}")
        self.sparse_ops = tuple(sparse)
        self.equations = tuple(_discretize(eq, self.subs) for eq in eqs)
        has_time = bool(sparse) or any(
            isinstance(n, Access) and n.func.time_varying
            for eq in self.equations for e in (eq.lhs, eq.rhs)
            for n in preorder(e))
        written = [eq.lhs.func for eq in self.equations]
        self.dtype = (written[0].dtype if written
                      else sparse[0].points.dtype if sparse
                      else np.dtype(np.float64))
        if dse == "none":
            self.oset = OptimizedExprSet.wrap(self.equations)
        else:
            self.oset = optimize(self.equations, dse, time_loop=has_time)
        base = schedule(self.oset, self.sparse_ops, self.subs, time_axis)
        self._set_nest(apply_dle(base, dle))

    def _set_nest(self, nest):
        self.nest = nest
        self.kernels = compile_nest(nest, self.dtype, self.stack_bound)

    # ------------------------------------------------------------------

    def flop_report(self):
        return flop_count(self.oset, self.dtype.itemsize)

    def binding(self, time=None, time_m=0, **kwargs):
        return bind(self.nest, self.dtype, kwargs, time, time_m)

    def apply(self, time=None, time_m=0, threads=None, trace=None,
              mode="vector", **kwargs):
        """Run on data bound by name; unbound data objects use their own."""
        b = bind(self.nest, self.dtype, kwargs, time, time_m)
        return run(self.kernels, b, threads=threads, trace=trace, mode=mode)

    __call__ = apply

    def reference(self, time=None, time_m=0, check_bounds=False, trace=None,
                  **kwargs):
        """Run the point-wise tree-walking interpreter on the same nest."""
        b = bind(self.nest, self.dtype, kwargs, time, time_m)
        return run_reference(self.nest, b, self.dtype, check_bounds, trace)

    def ccode(self) -> str:
        from .codegen import emit_c

        return emit_c(self.nest, name=self.name, dtype=self.dtype,
                      dse=self.dse)

    def __str__(self):
        return format_nest(self.nest)

    # ------------------------------------------------------------------

    def autotune(self, time=1, candidates=None, repeats=3, apply=True,
                 **kwargs):
        """Pick a block size by timing runs on private copies of the data.

        Each candidate gets one warm-up and ``repeats`` timed runs. With
        ``apply`` the winner replaces the current blocking.
        """
        repeats = max(int(repeats), 3)
        b0 = bind(self.nest, self.dtype, kwargs, time)
        dtype, stack_bound = self.dtype, self.stack_bound

        def runner(nest):
            ks = compile_nest(nest, dtype, stack_bound)
            times = []
            for k in range(repeats + 1):
                b = replace(b0, arrays={n: a.copy()
                                        for n, a in b0.arrays.items()},
                            scalars=dict(b0.scalars))
                got = run(ks, b)
                if k:
                    times.append(got.elapsed)
            return times

        spec, medians = autotune_blocks(self.nest, runner, candidates)
        if apply:
            self._set_nest(apply_blocking(self.nest, spec))
        return spec, medians
