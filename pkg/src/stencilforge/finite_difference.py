"""Finite-difference weights and expansion of derivative nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import HaloExceeded, SingularSystem
from .symbolic import (Access, Add, Const, Deriv, Dimension, Div, Expr, Mul,
                       Pow, make_add, preorder, simplify, xreplace)

__all__ = ["FdWeights", "DerivativeSpec", "fd_weights", "expand_derivatives",
           "solve"]


@dataclass(frozen=True)
class FdWeights:
    offsets: tuple
    coefficients: tuple  # Fractions
    spacing_power: int

    def as_floats(self):
        return tuple(float(c) for c in self.coefficients)


@dataclass(frozen=True)
class DerivativeSpec:
    dim: Dimension
    order: int
    side: str
    accuracy: int

    def __post_init__(self):
        if self.order < 1 or self.accuracy < 1:
            raise ValueError("derivative and accuracy order must be >= 1")
        if self.side == "centered" and self.accuracy % 2:
            raise ValueError("centred differences need an even accuracy")
        if self.side not in ("left", "right", "centered"):
            raise ValueError(f"unknown side {self.side!r}")

    @property
    def width(self):
        cut = 1 if self.order % 2 == 0 and self.side == "centered" else 0
        return self.accuracy + self.order - cut

    @property
    def offsets(self):
        w = self.width
        if self.side == "left":
            return tuple(range(-(w - 1), 1))
        if self.side == "right":
            return tuple(range(w))
        r = (w - 1) // 2
        return tuple(range(-r, r + 1))

    @property
    def reach(self):
        return max(abs(o) for o in self.offsets)


def fd_weights(d: int, offsets) -> FdWeights:
    """Weights ``w`` with sum_j w_j o_j^m = d! [m == d], m < len(offsets).

    Solved by Gaussian elimination in exact rational arithmetic.
    """
    offsets = tuple(int(o) for o in offsets)
    n = len(offsets)
    if n < d + 1:
        raise ValueError(f"{n} points cannot resolve a derivative of order {d}")
    if len(set(offsets)) != n:
        raise SingularSystem(f"repeated offsets in {offsets}")
    rows = [[Fraction(o) ** m for o in offsets]
            + [Fraction(math.factorial(d)) if m == d else Fraction(0)]
            for m in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            raise SingularSystem(f"singular moment system for {offsets}")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        p = rows[col][col]
        rows[col] = [v / p for v in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    return FdWeights(offsets, tuple(row[n] for row in rows), d)


def _spec(node: Deriv) -> DerivativeSpec:
    return DerivativeSpec(node.dim, node.order, node.side, node.accuracy)


def _expand_access(acc: Access, spec: DerivativeSpec) -> Expr:
    func = acc.func
    base = acc.offset(spec.dim)
    if base is None:
        raise ValueError(f"{func.name} does not vary along {spec.dim.name}")
    if spec.dim.is_time:
        # every level touched must live in its own buffer
        limit = func.time_order
        worst = max(spec.offsets) - min(spec.offsets)
    else:
        limit = func.halo
        worst = max(abs(base + o) for o in spec.offsets)
    if worst > limit:
        kind = "time_order" if spec.dim.is_time else "halo"
        raise HaloExceeded(
            f"stencil reach {worst} along {spec.dim.name} exceeds {kind} "
            f"{limit} of {func.name}")
    weights = fd_weights(spec.order, spec.offsets)
    step = spec.dim.spacing
    den = step if spec.order == 1 else Pow(step, spec.order)
    terms = [simplify(Div(Mul(Const(float(w)), acc.shifted(spec.dim, o)), den))
             for o, w in zip(weights.offsets, weights.coefficients) if w != 0]
    return make_add(terms)


def _expand_one(node: Deriv, target: Expr) -> Expr:
    spec = _spec(node)
    if isinstance(target, Access):
        return _expand_access(target, spec)
    if isinstance(target, Add):
        return Add(*(_expand_one(node, a) for a in target.args))
    if isinstance(target, Mul):
        varying = [a for a in target.args
                   if any(isinstance(n, Access) for n in preorder(a))]
        if len(varying) == 1:
            rest = [a for a in target.args if a is not varying[0]]
            return Mul(*rest, _expand_one(node, varying[0]))
    raise ValueError(f"cannot discretise a derivative of {target}")


def expand_derivatives(e: Expr) -> Expr:
    """Replace every Deriv node with its explicit stencil."""
    derivs = [n for n in preorder(e) if isinstance(n, Deriv)]
    if not derivs:
        return e
    table = {}
    for node in derivs:
        if node in table:
            continue
        inner = expand_derivatives(node.expr)
        table[node] = _expand_one(node, inner)
    return xreplace(e, table)


def solve(eq, target) -> Expr:
    """Discretise every derivative in ``eq`` and solve for ``target``."""
    from .symbolic import Eq, as_expr, solve_linear

    if isinstance(eq, Eq):
        eq = Eq(expand_derivatives(eq.lhs), expand_derivatives(eq.rhs))
    else:
        eq = Eq(expand_derivatives(as_expr(eq)))
    return solve_linear(eq, as_expr(target))
