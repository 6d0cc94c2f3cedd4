"""Immutable expression trees for finite-difference stencils.

The node set is deliberately small: constants, scalar symbols, grid
accesses, unexpanded derivatives and the four arithmetic forms (n-ary
``Add``/``Mul``, binary ``Div``, integer ``Pow``). Construction through the
Python operators never rewrites anything; :func:`simplify` produces the
canonical form used by every later pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Iterator, Mapping

from .errors import NonLinearTarget, TargetAbsent

__all__ = [
    "Dimension", "Relative", "Absolute", "Expr", "Const", "Symbol", "Access",
    "Deriv", "Add", "Mul", "Div", "Pow", "Eq", "as_expr", "simplify",
    "substitute", "xreplace", "free_symbols", "solve_linear", "preorder",
    "sort_key", "contains", "h", "s", "t", "x", "y", "z",
]


# ---------------------------------------------------------------------------
# Dimensions and index expressions


@dataclass(frozen=True)
class Dimension:
    name: str
    is_time: bool = False

    @property
    def spacing(self) -> "Symbol":
        return s if self.is_time else h

    def __add__(self, k):
        if isinstance(k, int):
            return Relative(self, k)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, k):
        if isinstance(k, int):
            return Relative(self, -k)
        return NotImplemented

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Relative:
    """Index ``dim + offset`` relative to the current loop point."""

    dim: Dimension
    offset: int = 0

    def __add__(self, k):
        if isinstance(k, int):
            return Relative(self.dim, self.offset + k)
        return NotImplemented

    def __sub__(self, k):
        if isinstance(k, int):
            return Relative(self.dim, self.offset - k)
        return NotImplemented

    def key(self):
        return (0, self.dim.name, self.offset)

    def fmt(self, scaled: bool) -> str:
        k = self.offset
        if k == 0:
            return self.dim.name
        step = self.dim.spacing.name if scaled else "1"
        sign = "+" if k > 0 else "-"
        if abs(k) == 1:
            return f"{self.dim.name} {sign} {step}"
        if scaled:
            return f"{self.dim.name} {sign} {abs(k)}*{step}"
        return f"{self.dim.name} {sign} {abs(k)}"


@dataclass(frozen=True)
class Absolute:
    value: int

    def key(self):
        return (1, "", self.value)

    def fmt(self, scaled: bool) -> str:
        return str(self.value)


def _as_index(i, dim: Dimension):
    if isinstance(i, (Relative, Absolute)):
        return i
    if isinstance(i, Dimension):
        return Relative(i, 0)
    if isinstance(i, int):
        return Absolute(i)
    raise TypeError(f"cannot use {i!r} as an index in dimension {dim.name}")


# ---------------------------------------------------------------------------
# Expression nodes


def as_expr(obj):
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, bool):
        return NotImplemented
    if isinstance(obj, Number):
        return Const(obj)
    conv = getattr(obj, "_as_expr", None)
    if conv is not None:
        return conv()
    return NotImplemented


class Expr:
    __slots__ = ("_hash", "_skey")

    args: tuple = ()

    def _finish(self, hashable):
        self._hash = hash(hashable)
        self._skey = None

    def __hash__(self):
        return self._hash

    def __setattr__(self, key, value):
        # nodes are frozen once hashed; only the sort-key cache may change
        if key != "_skey" and hasattr(self, "_hash"):
            raise AttributeError(f"{type(self).__name__} is immutable")
        object.__setattr__(self, key, value)

    def rebuild(self, args):
        raise NotImplementedError

    # operator sugar; never simplifies
    def __add__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Add(self, other)

    def __radd__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Add(other, self)

    def __sub__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Add(self, -other)

    def __rsub__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Add(other, -self)

    def __mul__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Mul(self, other)

    def __rmul__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Mul(other, self)

    def __truediv__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Div(self, other)

    def __rtruediv__(self, other):
        other = as_expr(other)
        return NotImplemented if other is NotImplemented else Div(other, self)

    def __neg__(self):
        return Mul(Const(-1.0), self)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int) or isinstance(n, bool):
            return NotImplemented
        return Pow(self, n)

    def __str__(self):
        return _fmt(self, 0)

    def __repr__(self):
        return str(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)
        self._finish(("Const", self.value))

    def __eq__(self, other):
        return type(other) is Const and other.value == self.value

    def rebuild(self, args):
        return self


class Symbol(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._finish(("Symbol", name))

    def __eq__(self, other):
        return type(other) is Symbol and other.name == self.name

    def rebuild(self, args):
        return self


class Access(Expr):
    """Read or write of a grid (or sparse) function at explicit indices."""

    __slots__ = ("func", "indices")

    def __init__(self, func, indices):
        dims = func.dimensions
        if len(indices) != len(dims):
            raise ValueError(
                f"{func.name} takes {len(dims)} indices, got {len(indices)}")
        self.func = func
        self.indices = tuple(_as_index(i, d) for i, d in zip(indices, dims))
        self._finish(("Access", func.name, self.indices))

    def __eq__(self, other):
        return (type(other) is Access and other.func is self.func
                and other.indices == self.indices)

    def rebuild(self, args):
        return self

    @property
    def is_relative(self):
        return all(isinstance(i, Relative) for i in self.indices)

    def offset(self, dim: Dimension):
        for i in self.indices:
            if isinstance(i, Relative) and i.dim == dim:
                return i.offset
        return None

    def shifted(self, dim: Dimension, k: int) -> "Access":
        new = []
        for i in self.indices:
            if isinstance(i, Relative) and i.dim == dim:
                i = Relative(dim, i.offset + k)
            new.append(i)
        return Access(self.func, tuple(new))


class Deriv(Expr):
    __slots__ = ("expr", "dim", "order", "side", "accuracy")

    def __init__(self, expr, dim: Dimension, order: int, side: str,
                 accuracy: int):
        if side not in ("left", "right", "centered"):
            raise ValueError(f"unknown side {side!r}")
        self.expr = as_expr(expr)
        self.dim = dim
        self.order = order
        self.side = side
        self.accuracy = accuracy
        self._finish(("Deriv", self.expr, dim, order, side, accuracy))

    @property
    def args(self):
        return (self.expr,)

    def __eq__(self, other):
        return (type(other) is Deriv and other.expr == self.expr
                and other.dim == self.dim and other.order == self.order
                and other.side == self.side
                and other.accuracy == self.accuracy)

    def rebuild(self, args):
        return Deriv(args[0], self.dim, self.order, self.side, self.accuracy)


class _Nary(Expr):
    __slots__ = ("args",)
    _tag = ""

    def __init__(self, *args):
        if len(args) < 2:
            raise ValueError(f"{type(self).__name__} needs >= 2 operands")
        self.args = tuple(as_expr(a) for a in args)
        if NotImplemented in self.args:
            raise TypeError(f"bad operand in {args!r}")
        self._finish((self._tag, self.args))

    def __eq__(self, other):
        return type(other) is type(self) and other.args == self.args

    def rebuild(self, args):
        return type(self)(*args)


class Add(_Nary):
    __slots__ = ()
    _tag = "Add"


class Mul(_Nary):
    __slots__ = ()
    _tag = "Mul"


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = as_expr(num)
        self.den = as_expr(den)
        self._finish(("Div", self.num, self.den))

    @property
    def args(self):
        return (self.num, self.den)

    def __eq__(self, other):
        return (type(other) is Div and other.num == self.num
                and other.den == self.den)

    def rebuild(self, args):
        return Div(*args)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base, exp: int):
        if not isinstance(exp, int) or exp < 0:
            raise ValueError("Pow exponent must be a non-negative integer")
        self.base = as_expr(base)
        self.exp = exp
        self._finish(("Pow", self.base, exp))

    @property
    def args(self):
        return (self.base,)

    def __eq__(self, other):
        return (type(other) is Pow and other.base == self.base
                and other.exp == self.exp)

    def rebuild(self, args):
        return Pow(args[0], self.exp)


for _cls in (Const, Symbol, Access, Deriv, Add, Mul, Div, Pow):
    _cls.__hash__ = Expr.__hash__


@dataclass(frozen=True)
class Eq:
    """``lhs = rhs``; as an operator input the lhs must be an Access."""

    lhs: Expr
    rhs: Expr = Const(0.0)

    def __init__(self, lhs, rhs=0.0):
        object.__setattr__(self, "lhs", _checked(lhs))
        object.__setattr__(self, "rhs", _checked(rhs))

    def __str__(self):
        return f"Eq({self.lhs}, {self.rhs})"


def _checked(obj):
    e = as_expr(obj)
    if e is NotImplemented:
        raise TypeError(f"cannot convert {obj!r} to an expression")
    return e


h = Symbol("h")
s = Symbol("s")
t = Dimension("t", is_time=True)
x = Dimension("x")
y = Dimension("y")
z = Dimension("z")


# ---------------------------------------------------------------------------
# Traversal helpers


def preorder(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.args))


def contains(e: Expr, sub: Expr) -> bool:
    return any(node == sub for node in preorder(e))


def xreplace(e: Expr, mapping: Mapping[Expr, Expr]) -> Expr:
    """Structural top-down replacement; replaced subtrees are not revisited."""
    memo = {}

    def rec(node):
        hit = mapping.get(node)
        if hit is not None:
            return hit
        if not node.args:
            return node
        got = memo.get(node)
        if got is None:
            new = tuple(rec(a) for a in node.args)
            got = node if new == node.args else node.rebuild(new)
            memo[node] = got
        return got

    return rec(e)


def free_symbols(e: Expr) -> set:
    """Scalar symbols and function objects referenced by ``e``."""
    out = set()
    for node in preorder(e):
        if isinstance(node, Symbol):
            out.add(node)
        elif isinstance(node, Access):
            out.add(node.func)
    return out


# ---------------------------------------------------------------------------
# Canonical ordering


def sort_key(e: Expr):
    k = e._skey
    if k is None:
        k = _make_key(e)
        e._skey = k
    return k


def _make_key(e):
    if isinstance(e, Const):
        return ("#", e.value)
    if isinstance(e, Symbol):
        return ("n", e.name, ())
    if isinstance(e, Access):
        return ("n", e.func.name, tuple(i.key() for i in e.indices))
    if isinstance(e, Mul):
        if isinstance(e.args[0], Const):
            return ("*", tuple(sort_key(a) for a in e.args[1:]),
                    e.args[0].value)
        return ("*", tuple(sort_key(a) for a in e.args), 1.0)
    if isinstance(e, Add):
        return ("+", tuple(sort_key(a) for a in e.args))
    if isinstance(e, Div):
        return ("/", sort_key(e.num), sort_key(e.den))
    if isinstance(e, Pow):
        return ("^", sort_key(e.base), e.exp)
    if isinstance(e, Deriv):
        return ("d", sort_key(e.expr), e.dim.name, e.order, e.side,
                e.accuracy)
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# Simplification


def simplify(e: Expr) -> Expr:
    memo = {}

    def rec(node):
        if not node.args:
            return node
        got = memo.get(node)
        if got is not None:
            return got
        if isinstance(node, Add):
            got = make_add([rec(a) for a in node.args])
        elif isinstance(node, Mul):
            got = make_mul([rec(a) for a in node.args])
        elif isinstance(node, Div):
            got = make_div(rec(node.num), rec(node.den))
        elif isinstance(node, Pow):
            got = make_pow(rec(node.base), node.exp)
        else:
            got = node.rebuild((rec(node.expr),))
        memo[node] = got
        return got

    return rec(_checked(e))


def split_coeff(e: Expr):
    """``(c, rest)`` with ``e == c*rest`` and ``rest`` coefficient-free."""
    if isinstance(e, Mul) and isinstance(e.args[0], Const):
        rest = e.args[1:]
        return e.args[0].value, rest[0] if len(rest) == 1 else Mul(*rest)
    return 1.0, e


def _scale(rest: Expr, c: float) -> Expr:
    if c == 1.0:
        return rest
    return make_mul([Const(c), rest])


def make_add(ops) -> Expr:
    """Canonical sum of already-simplified operands."""
    flat = []
    for o in ops:
        if isinstance(o, Add):
            flat.extend(o.args)
        else:
            flat.append(o)
    flat.sort(key=sort_key)
    const = 0.0
    terms: dict = {}
    for o in flat:
        if isinstance(o, Const):
            const += o.value
            continue
        c, rest = split_coeff(o)
        terms[rest] = terms.get(rest, 0.0) + c
    out = [Const(const)] if const != 0.0 else []
    out.extend(_scale(r, c) for r, c in terms.items() if c != 0.0)
    if not out:
        return Const(0.0)
    if len(out) == 1:
        return out[0]
    out.sort(key=sort_key)
    return Add(*out)


def make_mul(ops) -> Expr:
    """Canonical product of already-simplified operands."""
    flat = []
    for o in ops:
        if isinstance(o, Mul):
            flat.extend(o.args)
        else:
            flat.append(o)
    consts = sorted(o.value for o in flat if isinstance(o, Const))
    coef = 1.0
    for v in consts:
        coef *= v
    if coef == 0.0:
        return Const(0.0)
    others = sorted((o for o in flat if not isinstance(o, Const)),
                    key=sort_key)
    if not others:
        return Const(coef)
    out = others if coef == 1.0 else [Const(coef)] + others
    if len(out) == 1:
        return out[0]
    return Mul(*out)


def make_div(num: Expr, den: Expr) -> Expr:
    if isinstance(den, Const):
        if den.value == 0.0:
            raise ZeroDivisionError(f"division of {num} by zero")
        return make_mul([Const(1.0 / den.value), num])
    if isinstance(num, Const):
        if num.value == 0.0:
            return num
        cn, rn = num.value, Const(1.0)
    else:
        cn, rn = split_coeff(num)
    cd, rd = split_coeff(den)
    if isinstance(rn, Div):
        return _scale(make_div(rn.num, make_mul([rn.den, rd])), cn / cd)
    if isinstance(rd, Div):
        return _scale(make_div(make_mul([rn, rd.den]), rd.num), cn / cd)
    return _scale(Div(rn, rd), cn / cd)


def make_pow(base: Expr, n: int) -> Expr:
    if n == 0:
        return Const(1.0)
    if n == 1:
        return base
    if isinstance(base, Const):
        v = 1.0
        for _ in range(n):
            v *= base.value
        return Const(v)
    if isinstance(base, Pow):
        return make_pow(base.base, base.exp * n)
    return Pow(base, n)


def substitute(e: Expr, mapping: Mapping) -> Expr:
    """Replace scalar symbols (or their names) by numbers, then simplify."""
    table = {}
    for k, v in mapping.items():
        key = Symbol(k) if isinstance(k, str) else k
        if not isinstance(key, Symbol):
            raise TypeError(f"substitution keys must be symbols, got {k!r}")
        table[key] = Const(v)
    return simplify(xreplace(_checked(e), table))


# ---------------------------------------------------------------------------
# Linear solve


def _mono_key(factors: dict):
    return tuple(sorted(factors.items(), key=lambda kv: sort_key(kv[0])))


def _times(a, b):
    out = []
    for ca, fa in a:
        for cb, fb in b:
            f = dict(fa)
            for atom, k in fb:
                n = f.get(atom, 0) + k
                if n:
                    f[atom] = n
                else:
                    f.pop(atom, None)
            out.append((ca * cb, _mono_key(f)))
    return out


def _expand(e: Expr, target: Expr):
    """Distribute ``e`` into monomials ``(coef, ((atom, exp), ...))``."""
    if isinstance(e, Const):
        return [(e.value, ())]
    if isinstance(e, (Symbol, Access)):
        return [(1.0, ((e, 1),))]
    if isinstance(e, Add):
        return [term for a in e.args for term in _expand(a, target)]
    if isinstance(e, Mul):
        acc = [(1.0, ())]
        for a in e.args:
            acc = _times(acc, _expand(a, target))
        return acc
    if isinstance(e, Pow):
        acc = [(1.0, ())]
        base = _expand(e.base, target)
        for _ in range(e.exp):
            acc = _times(acc, base)
        return acc
    if isinstance(e, Div):
        num = _expand(e.num, target)
        den = _collect(_expand(e.den, target))
        if len(den) == 1:
            c, f = den[0]
            return _times(num, [(1.0 / c, tuple((a, -k) for a, k in f))])
        if contains(e.den, target):
            raise NonLinearTarget(f"{target} occurs in a denominator")
        return _times(num, [(1.0, ((simplify(e.den), -1),))])
    if isinstance(e, Deriv):
        raise ValueError("expand derivatives before solving")
    raise TypeError(type(e))


def _collect(terms):
    acc: dict = {}
    for c, f in terms:
        acc[f] = acc.get(f, 0.0) + c
    return [(c, f) for f, c in acc.items() if c != 0.0]


def _mono_expr(c, factors) -> Expr:
    ops = [Const(c)]
    for atom, k in factors:
        ops.append(atom if k == 1 else Pow(atom, k))
    return make_mul(ops)


def _common_denominator(terms):
    den = {}
    for _, f in terms:
        for atom, k in f:
            if k < 0:
                den[atom] = max(den.get(atom, 0), -k)
    return den


def _shift(terms, den):
    out = []
    for c, f in terms:
        d = dict(f)
        for atom, k in den.items():
            n = d.get(atom, 0) + k
            if n:
                d[atom] = n
            else:
                d.pop(atom, None)
        out.append((c, _mono_key(d)))
    return out


def _combine(terms) -> Expr:
    """Sum of monomials over their common denominator."""
    if not terms:
        return Const(0.0)
    den = _common_denominator(terms)
    terms = _shift(terms, den)
    coefs = {c for c, _ in terms}
    common = 1.0
    if len(terms) > 1 and len(coefs) == 1:
        common = coefs.pop()
        terms = [(1.0, f) for _, f in terms]
    num = make_add([_mono_expr(c, f) for c, f in terms])
    num = _scale(num, common)
    if not den:
        return num
    return make_div(num, _mono_expr(1.0, _mono_key(den)))


def solve_linear(eq, target: Expr) -> Expr:
    """Solve ``eq`` (affine in ``target``) for ``target``.

    The residual ``lhs - rhs`` is fully distributed into monomials whose
    denominators are products of atoms; non-monomial denominators are kept
    as opaque atoms and must not contain ``target``.
    """
    if isinstance(eq, Eq):
        residual = Add(eq.lhs, Mul(Const(-1.0), eq.rhs))
    else:
        residual = _checked(eq)
    target = _checked(target)
    coeff, rest = [], []
    for c, f in _collect(_expand(residual, target)):
        k = 0
        others = []
        for atom, e in f:
            if atom == target:
                k = e
            else:
                if contains(atom, target):
                    raise NonLinearTarget(f"{target} occurs inside {atom}")
                others.append((atom, e))
        if k == 0:
            rest.append((c, f))
        elif k == 1:
            coeff.append((c, tuple(others)))
        else:
            raise NonLinearTarget(f"{target} occurs with power {k}")
    if not coeff:
        raise TargetAbsent(f"{target} does not occur in the equation")
    if len(coeff) == 1:
        ca, fa = coeff[0]
        inv = tuple((a, -k) for a, k in fa)
        terms = _times([(-c / ca, f) for c, f in rest], [(1.0, inv)])
        return simplify(_combine(_collect(terms)))
    den = _common_denominator(coeff)
    num_terms = _shift([(-c, f) for c, f in rest], den)
    den_terms = sorted(_shift(coeff, den),
                       key=lambda cf: [sort_key(a) for a, _ in cf[1]])
    if den_terms[0][0] < 0:
        num_terms = [(-c, f) for c, f in num_terms]
        den_terms = [(-c, f) for c, f in den_terms]
    return simplify(make_div(_combine(_collect(num_terms)),
                             _combine(den_terms)))


# ---------------------------------------------------------------------------
# Printing


def _fmt_const(v: float) -> str:
    return repr(v)


def _fmt_access(e: Access) -> str:
    if e.is_relative:
        inner = ", ".join(i.fmt(True) for i in e.indices)
        return f"{e.func.name}({inner})"
    inner = ", ".join(i.fmt(False) for i in e.indices)
    return f"{e.func.name}[{inner}]"


def _fmt(e: Expr, prec: int) -> str:
    # precedence: 0 top, 1 sum, 2 product, 3 power
    if isinstance(e, Const):
        text = _fmt_const(e.value)
        return f"({text})" if e.value < 0 and prec > 0 else text
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Access):
        return _fmt_access(e)
    if isinstance(e, Deriv):
        return (f"Deriv({_fmt(e.expr, 0)}, {e.dim.name}, {e.order}, "
                f"{e.side}, {e.accuracy})")
    if isinstance(e, Add):
        parts = []
        for i, a in enumerate(e.args):
            c, rest = split_coeff(a)
            if c < 0 and i > 0:
                mag = _fmt(_scale(rest, -c), 1)
                parts.append(f" - {mag}")
            elif i > 0:
                parts.append(f" + {_fmt(a, 1)}")
            else:
                parts.append(_fmt(a, 1))
        text = "".join(parts)
        return f"({text})" if prec > 1 else text
    if isinstance(e, Mul):
        ops = list(e.args)
        lead = ""
        if isinstance(ops[0], Const) and ops[0].value == -1.0:
            lead = "-"
            ops = ops[1:]
        text = lead + "*".join(_fmt(a, 2) for a in ops)
        return f"({text})" if prec > 2 or (lead and prec > 1) else text
    if isinstance(e, Div):
        text = f"{_fmt(e.num, 2)}/{_fmt(e.den, 3)}"
        return f"({text})" if prec > 2 else text
    if isinstance(e, Pow):
        return f"{_fmt(e.base, 3)}**{e.exp}"
    raise TypeError(type(e))
