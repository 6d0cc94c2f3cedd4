"""Flop-reducing rewrites on discretised assignment sets.

Passes: common-subexpression elimination, promotion of time-invariant
subexpressions out of the time loop, and grouping of terms that share a
finite-difference weight. ``flop_count`` measures the result.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace

from .symbolic import (Access, Add, Const, Deriv, Div, Eq, Expr, Mul, Pow,
                       Relative, Symbol, make_add, make_mul, preorder,
                       sort_key, split_coeff, xreplace)

__all__ = ["Hoisted", "OptimizedExprSet", "FlopReport", "op_counts",
           "flop_count", "eliminate_common_subexpressions",
           "hoist_time_invariants", "factorize_weights", "optimize",
           "DSE_LEVELS"]

DSE_LEVELS = ("basic", "advanced")


@dataclass(frozen=True)
class Hoisted:
    """Precomputation run once before the time loop.

    ``func`` is the scratch grid function receiving the values, or None
    for a scalar.
    """

    name: str
    expr: Expr
    func: object = None

    @property
    def ref(self) -> Expr:
        if self.func is None:
            return Symbol(self.name)
        return self.func._as_expr()


@dataclass(frozen=True)
class OptimizedExprSet:
    assignments: tuple
    temporaries: tuple = ()  # (Symbol, Expr), dependency ordered
    hoisted: tuple = ()

    @classmethod
    def wrap(cls, obj) -> "OptimizedExprSet":
        if isinstance(obj, OptimizedExprSet):
            return obj
        eqs = tuple(obj)
        for eq in eqs:
            for node in preorder(eq.rhs):
                if isinstance(node, Deriv):
                    raise ValueError("assignments must be discretised first")
        return cls(eqs)

    def expressions(self):
        return [e for _, e in self.temporaries] + [eq.rhs for eq in
                                                   self.assignments]

    @property
    def written(self):
        return {eq.lhs.func for eq in self.assignments
                if isinstance(eq.lhs, Access)}


# ---------------------------------------------------------------------------
# counting


def _neg_rest(e):
    """For a term ``-c*rest`` return the positive form, else None."""
    c, rest = split_coeff(e)
    if c < 0:
        return rest if c == -1.0 else Mul(Const(-c), *_factors(rest))
    return None


def _factors(e):
    return e.args if isinstance(e, Mul) else (e,)


def op_counts(e: Expr) -> Counter:
    """Per-evaluation arithmetic of ``e`` as executed by the backends.

    A negative-coefficient operand of a sum is a subtraction; a leading
    ``-1`` factor is a sign flip and costs nothing.
    """
    out = Counter(adds=0, muls=0, divs=0)
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Add):
            out["adds"] += len(node.args) - 1
            stack.append(node.args[0])
            for a in node.args[1:]:
                pos = _neg_rest(a)
                stack.append(a if pos is None else pos)
        elif isinstance(node, Mul):
            ops = node.args
            if isinstance(ops[0], Const) and ops[0].value == -1.0:
                ops = ops[1:]
            out["muls"] += len(ops) - 1
            stack.extend(ops)
        elif isinstance(node, Div):
            out["divs"] += 1
            stack.extend(node.args)
        elif isinstance(node, Pow):
            out["muls"] += max(node.exp - 1, 0)
            stack.append(node.base)
        elif isinstance(node, Deriv):
            raise ValueError("cannot count flops of an unexpanded derivative")
    return out


def _cost(e: Expr) -> int:
    c = op_counts(e)
    return c["adds"] + c["muls"] + c["divs"]


def _height(e: Expr) -> int:
    if not e.args:
        return 0
    return 1 + max(_height(a) for a in e.args)


@dataclass
class FlopReport:
    """Per-grid-point cost of the time-loop body.

    ``bytes`` assumes a perfect cache: each distinct array (a function at
    one time level, or a scratch buffer) is moved once per point.
    """

    adds: int
    muls: int
    divs: int
    bytes: int
    hoisted_flops: int = 0
    arrays: tuple = field(default=(), repr=False)

    @property
    def flops(self):
        return self.adds + self.muls + self.divs

    @property
    def oi(self):
        return self.flops / self.bytes if self.bytes else 0.0

    def as_dict(self):
        return {"adds": self.adds, "muls": self.muls, "divs": self.divs,
                "flops": self.flops, "bytes": self.bytes, "oi": self.oi}

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)


def _array_key(acc: Access):
    off = acc.offset(acc.func.dimensions[0]) if acc.func.time_varying else None
    time = None
    if acc.func.time_varying:
        idx = acc.indices[0]
        time = ("rel", off) if isinstance(idx, Relative) else ("abs", idx.value)
    return (acc.func.name, time)


def flop_count(oset, itemsize: int = 8) -> FlopReport:
    oset = OptimizedExprSet.wrap(oset)
    total = Counter(adds=0, muls=0, divs=0)
    arrays = set()
    for e in oset.expressions():
        total.update(op_counts(e))
        arrays.update(_array_key(n) for n in preorder(e)
                      if isinstance(n, Access))
    for eq in oset.assignments:
        if isinstance(eq.lhs, Access):
            arrays.add(_array_key(eq.lhs))
    hoisted = sum(_cost(hh.expr) for hh in oset.hoisted)
    return FlopReport(total["adds"], total["muls"], total["divs"],
                      itemsize * len(arrays), hoisted, tuple(sorted(
                          arrays, key=repr)))


# ---------------------------------------------------------------------------
# CSE


def _temp_names(oset):
    used = {sym.name for sym, _ in oset.temporaries}
    k = 0
    while True:
        name = f"t{k}"
        if name not in used:
            yield Symbol(name)
        k += 1


def eliminate_common_subexpressions(assignments) -> OptimizedExprSet:
    """Bind every repeated non-trivial subexpression to a temporary.

    Candidates are taken bottom-up (lowest tree height first, ties broken
    by canonical order) and re-counted after every replacement.
    """
    oset = OptimizedExprSet.wrap(assignments)
    temps = list(oset.temporaries)
    rhs = [eq.rhs for eq in oset.assignments]
    names = _temp_names(oset)
    while True:
        counts = Counter()
        for e in [d for _, d in temps] + rhs:
            counts.update(n for n in preorder(e) if n.args)
        cands = [e for e, c in counts.items() if c >= 2 and _cost(e) >= 1]
        if not cands:
            break
        pick = min(cands, key=lambda e: (_height(e), sort_key(e)))
        sym = next(names)
        table = {pick: sym}
        temps = [(ts, xreplace(d, table)) for ts, d in temps]
        temps.append((sym, pick))
        rhs = [xreplace(e, table) for e in rhs]
    eqs = tuple(Eq(eq.lhs, r) for eq, r in zip(oset.assignments, rhs))
    return replace(oset, assignments=eqs, temporaries=tuple(temps))


# ---------------------------------------------------------------------------
# time-invariant hoisting


def _scratch(name, expr):
    from .grid import Function

    accs = [n for n in preorder(expr) if isinstance(n, Access)]
    grid = accs[0].func.grid
    used = {i.dim for a in accs for i in a.indices if isinstance(i, Relative)}
    dims = tuple(d for d in grid.dimensions if d in used)
    dtype = accs[0].func.dtype
    return Function(name, grid, dimensions=dims, dtype=dtype)


def hoist_time_invariants(oset) -> OptimizedExprSet:
    """Move maximal loop-invariant subexpressions before the time loop.

    Invariant means: only constants, scalar symbols and accesses to
    functions that are neither time-varying nor written by the set.
    """
    oset = OptimizedExprSet.wrap(oset)
    written = oset.written
    temp_defs = {}
    variant_temps = set()
    hoisted = list(oset.hoisted)
    by_expr = {hh.expr: hh for hh in hoisted}
    counter = [len(hoisted)]
    memo = {}

    def invariant(e):
        got = memo.get(e)
        if got is None:
            got = _invariant(e)
            memo[e] = got
        return got

    def _invariant(e):
        if isinstance(e, Const):
            return True
        if isinstance(e, Symbol):
            return e not in variant_temps
        if isinstance(e, Access):
            f = e.func
            return (not getattr(f, "time_varying", True) and f not in written
                    and not getattr(f, "is_sparse", False))
        return all(invariant(a) for a in e.args)

    def hoist(e):
        hh = by_expr.get(e)
        if hh is None:
            name = f"q{counter[0]}"
            counter[0] += 1
            has_grid = any(isinstance(n, Access) for n in preorder(e))
            hh = Hoisted(name, e, _scratch(name, e) if has_grid else None)
            by_expr[e] = hh
            hoisted.append(hh)
        return hh.ref

    def rewrite(e):
        if not e.args:
            return e
        if invariant(e) and _cost(e) >= 1:
            return hoist(e)
        if isinstance(e, (Add, Mul)):
            inv = [a for a in e.args if invariant(a)]
            var = [a for a in e.args if not invariant(a)]
            make = make_add if isinstance(e, Add) else make_mul
            if len(inv) >= 2 and _cost(make(inv)) >= 1:
                new = [rewrite(a) for a in var] + [hoist(make(inv))]
                return make(new)
        return e.rebuild(tuple(rewrite(a) for a in e.args))

    temps = []
    replaced = {}
    for sym, d in oset.temporaries:
        d = xreplace(d, replaced) if replaced else d
        if invariant(d) and d.args:
            replaced[sym] = hoist(d)
            continue
        if not invariant(d):
            variant_temps.add(sym)
            memo.clear()
        temps.append((sym, rewrite(d)))
    eqs = []
    for eq in oset.assignments:
        r = xreplace(eq.rhs, replaced) if replaced else eq.rhs
        eqs.append(Eq(eq.lhs, rewrite(r)))
    return OptimizedExprSet(tuple(eqs), tuple(temps), tuple(hoisted))


# ---------------------------------------------------------------------------
# weight factorisation


def _factorize(e: Expr, memo) -> Expr:
    if not e.args:
        return e
    got = memo.get(e)
    if got is not None:
        return got
    args = tuple(_factorize(a, memo) for a in e.args)
    if not isinstance(e, Add):
        got = e if args == e.args else e.rebuild(args)
        memo[e] = got
        return got
    groups: dict = {}
    for a in args:
        c, rest = split_coeff(a)
        groups.setdefault(c, []).append((a, rest))
    new = []
    for c, members in groups.items():
        if len(members) >= 2 and c not in (1.0, -1.0):
            new.append(make_mul([Const(c), make_add([r for _, r in members])]))
        else:
            new.extend(a for a, _ in members)
    got = e if len(new) == len(args) else (
        new[0] if len(new) == 1 else Add(*sorted(new, key=sort_key)))
    memo[e] = got
    return got


def factorize_weights(oset) -> OptimizedExprSet:
    """Group sum terms that share a numeric coefficient: w*a + w*b -> w*(a+b)."""
    oset = OptimizedExprSet.wrap(oset)
    memo = {}
    temps = tuple((sym, _factorize(d, memo)) for sym, d in oset.temporaries)
    eqs = tuple(Eq(eq.lhs, _factorize(eq.rhs, memo))
                for eq in oset.assignments)
    hoisted = tuple(replace(hh, expr=_factorize(hh.expr, memo))
                    for hh in oset.hoisted)
    return OptimizedExprSet(eqs, temps, hoisted)


def optimize(assignments, level: str = "advanced",
             time_loop: bool = True) -> OptimizedExprSet:
    """Run the pass pipeline for a DSE level.

    Hoisting is skipped without a time loop, where it cannot amortise.
    """
    if level not in DSE_LEVELS:
        raise ValueError(f"unknown DSE level {level!r}")
    oset = eliminate_common_subexpressions(assignments)
    if level == "advanced":
        if time_loop:
            oset = hoist_time_invariants(oset)
        oset = factorize_weights(oset)
        oset = eliminate_common_subexpressions(oset)
    return oset
