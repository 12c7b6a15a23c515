"""A small expression language for Lagrangians and coefficient functions.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``NUMBER`` accepts decimal and exponent notation and a trailing ``j`` for an
imaginary literal. ``FUNC`` is one of ``sin``, ``cos``, ``exp``, ``log``.
``pi`` is a built-in constant unless the symbol table declares it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "Func",
    "Symbol",
    "SymbolTable",
    "ParseError",
    "UnknownSymbolError",
    "DomainError",
    "UnboundVariableError",
    "parse",
    "diff",
    "evaluate",
    "simplify",
    "substitute",
    "free_vars",
    "to_string",
    "as_expr",
    "is_real_tree",
    "ZERO",
    "ONE",
]

FUNCTIONS = ("sin", "cos", "exp", "log")
ROLES = ("time", "position", "velocity", "momentum", "field", "parameter")


class ParseError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownSymbolError(ParseError):
    pass


class DomainError(ArithmeticError):
    pass


class UnboundVariableError(KeyError):
    pass


# --------------------------------------------------------------------------
# expression nodes


class Expr:
    __slots__ = ()

    def __add__(self, other) -> Expr:
        return Add(self, as_expr(other))

    def __radd__(self, other) -> Expr:
        return Add(as_expr(other), self)

    def __sub__(self, other) -> Expr:
        return Sub(self, as_expr(other))

    def __rsub__(self, other) -> Expr:
        return Sub(as_expr(other), self)

    def __mul__(self, other) -> Expr:
        return Mul(self, as_expr(other))

    def __rmul__(self, other) -> Expr:
        return Mul(as_expr(other), self)

    def __truediv__(self, other) -> Expr:
        return Div(self, as_expr(other))

    def __rtruediv__(self, other) -> Expr:
        return Div(as_expr(other), self)

    def __pow__(self, other) -> Expr:
        return Pow(self, as_expr(other))

    def __neg__(self) -> Expr:
        return Neg(self)

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self) -> None:
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


ZERO = Const(0)
ONE = Const(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


# --------------------------------------------------------------------------
# symbol table


@dataclass(frozen=True)
class Symbol:
    name: str
    role: str
    index: int = 0

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", self.name):
            raise ValueError(f"invalid symbol name {self.name!r}")
        if self.name in FUNCTIONS:
            raise ValueError(f"{self.name!r} is reserved")


@dataclass(frozen=True)
class SymbolTable:
    """Ordered symbols with roles.

    ``index`` orders symbols sharing a role (the component of a position or
    the slot number of a velocity). Parameters may carry default values.
    """

    symbols: tuple[Symbol, ...]
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(self.symbols))
        names = [s.name for s in self.symbols]
        if len(set(names)) != len(names):
            raise ValueError("symbol names must be unique")
        object.__setattr__(self, "parameters", dict(self.parameters))
        for k in self.parameters:
            if k not in names:
                raise ValueError(f"parameter value for undeclared symbol {k!r}")
            if self[k].role != "parameter":
                raise ValueError(f"{k!r} is not a parameter")

    @classmethod
    def build(cls, parameters: Mapping[str, float] | None = None, **roles) -> SymbolTable:
        """``SymbolTable.build(time="t", position=["x"], velocity=["v"])``."""
        syms = []
        for role, names in roles.items():
            if isinstance(names, str):
                names = [names]
            for i, n in enumerate(names):
                syms.append(Symbol(n, role, i))
        params = dict(parameters or {})
        declared = {s.name for s in syms}
        for k in params:
            if k not in declared:
                syms.append(Symbol(k, "parameter", 0))
        return cls(tuple(syms), params)

    def __contains__(self, name: str) -> bool:
        return any(s.name == name for s in self.symbols)

    def __getitem__(self, name: str) -> Symbol:
        for s in self.symbols:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.symbols)

    def with_role(self, role: str) -> tuple[str, ...]:
        return tuple(s.name for s in sorted(
            (s for s in self.symbols if s.role == role), key=lambda s: s.index))


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if val == "**":
            val = "^"
        toks.append((kind, val, start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable | None) -> None:
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val: str) -> None:
        kind, v, pos = self.peek()
        if v != val or kind == "end":
            raise ParseError(f"expected {val!r}", pos)
        self.i += 1

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.unary()
            e = Mul(e, r) if op == "*" else Div(e, r)
        return e

    def unary(self) -> Expr:
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and v == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, v, pos = self.take()
        if kind == "num":
            return Const(complex(0, float(v[:-1])) if v.endswith("j") else float(v))
        if kind == "name":
            if v in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(v, arg)
            if self.symbols is None or v not in self.symbols:
                if v == "pi":
                    return Const(math.pi)
            if self.symbols is not None and v not in self.symbols:
                raise UnknownSymbolError(f"unknown identifier {v!r}", pos)
            return Var(v)
        if kind == "op" and v == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {v!r}", pos)


def parse(text: str, symbols: SymbolTable | None = None) -> Expr:
    """Parse ``text``; with a table, unknown identifiers are rejected."""
    p = _Parser(text, symbols)
    e = p.expr()
    kind, v, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {v!r}", pos)
    return e


# --------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_number(z: complex) -> str:
    def real(x: float) -> str:
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        return repr(x)

    if z.imag == 0:
        return real(z.real)
    if z.real == 0:
        return real(z.imag) + "j"
    sign = "+" if z.imag >= 0 else "-"
    return f"({real(z.real)}{sign}{real(abs(z.imag))}j)"


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        z = e.value
        if z.imag == 0 and z.real < 0:
            return 3
        if z.imag != 0 and z.real == 0 and z.imag < 0:
            return 3
        return 5
    return _PREC.get(type(e), 5)


def to_string(e: Expr) -> str:
    """Render ``e`` in the parser's grammar with minimal parentheses."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        return f"-{inner}" if _prec(e.arg) > 3 else f"-({inner})"
    if isinstance(e, Pow):
        b = to_string(e.base)
        x = to_string(e.exponent)
        if _prec(e.base) <= 4:
            b = f"({b})"
        if _prec(e.exponent) < 3:
            x = f"({x})"
        return f"{b}^{x}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    p = _PREC[type(e)]
    left = to_string(e.left)
    right = to_string(e.right)
    if _prec(e.left) < p:
        left = f"({left})"
    # left-associative: a - (b + c), a / (b * c) keep their parentheses
    if _prec(e.right) < p or (_prec(e.right) == p and isinstance(e, (Sub, Div))):
        right = f"({right})"
    if _prec(e.right) == 3:
        right = f"({right})"
    return f"{left} {op} {right}" if p == 1 else f"{left}*{right}" if op == "*" else f"{left}/{right}"


# --------------------------------------------------------------------------
# structural utilities


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, (Neg, Func)):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base) | free_vars(e.exponent)
    return free_vars(e.left) | free_vars(e.right)


def substitute(e: Expr, mapping: Mapping[str, Expr | complex]) -> Expr:
    """Replace variables by expressions (or numbers)."""
    if isinstance(e, Var):
        return as_expr(mapping[e.name]) if e.name in mapping else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), substitute(e.exponent, mapping))
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


def is_real_tree(e: Expr) -> bool:
    """True when every constant in the tree is real."""
    if isinstance(e, Const):
        return e.value.imag == 0
    if isinstance(e, Var):
        return True
    if isinstance(e, (Neg, Func)):
        return is_real_tree(e.arg)
    if isinstance(e, Pow):
        return is_real_tree(e.base) and is_real_tree(e.exponent)
    return is_real_tree(e.left) and is_real_tree(e.right)


# --------------------------------------------------------------------------
# differentiation


def diff(e: Expr, var: str) -> Expr:
    """Exact partial derivative with respect to ``var``, lightly simplified."""
    return simplify(_diff(e, var))


def _diff(e: Expr, var: str) -> Expr:
    if var not in free_vars(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return Add(_diff(e.left, var), _diff(e.right, var))
    if isinstance(e, Sub):
        return Sub(_diff(e.left, var), _diff(e.right, var))
    if isinstance(e, Neg):
        return Neg(_diff(e.arg, var))
    if isinstance(e, Mul):
        return Add(Mul(_diff(e.left, var), e.right), Mul(e.left, _diff(e.right, var)))
    if isinstance(e, Div):
        num = Sub(Mul(_diff(e.left, var), e.right), Mul(e.left, _diff(e.right, var)))
        return Div(num, Pow(e.right, Const(2)))
    if isinstance(e, Pow):
        b, x = e.base, e.exponent
        if var not in free_vars(x):
            return Mul(Mul(x, Pow(b, Sub(x, ONE))), _diff(b, var))
        # general case b^x = exp(x log b)
        inner = Add(Mul(_diff(x, var), Func("log", b)), Div(Mul(x, _diff(b, var)), b))
        return Mul(e, inner)
    if isinstance(e, Func):
        da = _diff(e.arg, var)
        if e.name == "sin":
            outer: Expr = Func("cos", e.arg)
        elif e.name == "cos":
            outer = Neg(Func("sin", e.arg))
        elif e.name == "exp":
            outer = e
        else:
            outer = Div(ONE, e.arg)
        return Mul(outer, da)
    raise TypeError(f"unsupported node {type(e).__name__}")


# --------------------------------------------------------------------------
# simplification (constant folding and 0/1 identities only)


def _is(e: Expr, v: complex) -> bool:
    return isinstance(e, Const) and e.value == v


def simplify(e: Expr) -> Expr:
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        a = simplify(e.arg)
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(e, Func):
        a = simplify(e.arg)
        if isinstance(a, Const) and e.name != "log":
            return Const(_FUNCS[e.name](a.value))
        return Func(e.name, a)
    if isinstance(e, Pow):
        b, x = simplify(e.base), simplify(e.exponent)
        if _is(x, 0):
            return ONE
        if _is(x, 1):
            return b
        if isinstance(b, Const) and isinstance(x, Const) and b.value != 0:
            return Const(_power(b.value, x.value))
        return Pow(b, x)
    left, right = simplify(e.left), simplify(e.right)
    both = isinstance(left, Const) and isinstance(right, Const)
    if isinstance(e, Add):
        if both:
            return Const(left.value + right.value)
        if _is(left, 0):
            return right
        if _is(right, 0):
            return left
        return Add(left, right)
    if isinstance(e, Sub):
        if both:
            return Const(left.value - right.value)
        if _is(right, 0):
            return left
        if _is(left, 0):
            return simplify(Neg(right))
        return Sub(left, right)
    if isinstance(e, Mul):
        if both:
            return Const(left.value * right.value)
        if _is(left, 0) or _is(right, 0):
            return ZERO
        if _is(left, 1):
            return right
        if _is(right, 1):
            return left
        if _is(left, -1):
            return simplify(Neg(right))
        if _is(right, -1):
            return simplify(Neg(left))
        if isinstance(left, Const) and isinstance(right, Mul) and isinstance(right.left, Const):
            return simplify(Mul(Const(left.value * right.left.value), right.right))
        return Mul(left, right)
    if isinstance(e, Div):
        if both and right.value != 0:
            return Const(left.value / right.value)
        if _is(right, 1):
            return left
        if _is(left, 0) and not _is(right, 0):
            return ZERO
        return Div(left, right)
    raise TypeError(f"unsupported node {type(e).__name__}")


def _power(b: complex, x: complex) -> complex:
    if x.imag == 0 and x.real.is_integer():
        return b ** int(x.real)
    if b.imag == 0 and b.real > 0 and x.imag == 0:
        return complex(b.real ** x.real)
    return b**x


_FUNCS = {
    "sin": lambda z: complex(np.sin(z)),
    "cos": lambda z: complex(np.cos(z)),
    "exp": lambda z: complex(np.exp(z)),
}


# --------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate with numpy broadcasting; scalars in, complex scalar out.

    Bindings may be scalars or arrays. Raises :class:`DomainError` for
    ``log(0)``, division by zero and ``0`` raised to a negative power.
    """
    scalar = all(np.ndim(v) == 0 for v in bindings.values())
    out = _eval(e, bindings)
    out = np.asarray(out, dtype=np.complex128)
    return complex(out) if scalar and out.ndim == 0 else out


def _eval(e: Expr, b: Mapping[str, object]):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return np.asarray(b[e.name], dtype=np.complex128)
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Add):
        return _eval(e.left, b) + _eval(e.right, b)
    if isinstance(e, Sub):
        return _eval(e.left, b) - _eval(e.right, b)
    if isinstance(e, Mul):
        return _eval(e.left, b) * _eval(e.right, b)
    if isinstance(e, Div):
        den = np.asarray(_eval(e.right, b))
        if np.any(den == 0):
            raise DomainError("division by zero")
        return _eval(e.left, b) / den
    if isinstance(e, Pow):
        base = np.asarray(_eval(e.base, b), dtype=np.complex128)
        if isinstance(e.exponent, Const):
            x = e.exponent.value
            if x.imag == 0 and x.real.is_integer():
                k = int(x.real)
                if k < 0 and np.any(base == 0):
                    raise DomainError("zero raised to a negative power")
                return _int_power(base, k)
        ex = np.asarray(_eval(e.exponent, b), dtype=np.complex128)
        if np.any((base == 0) & (ex.real <= 0)):
            raise DomainError("zero raised to a non-positive power")
        with np.errstate(all="ignore"):
            return np.power(base, ex)
    if isinstance(e, Func):
        a = np.asarray(_eval(e.arg, b), dtype=np.complex128)
        if e.name == "log":
            if np.any(a == 0):
                raise DomainError("log of zero")
            return np.log(a)
        return getattr(np, e.name)(a)
    raise TypeError(f"unsupported node {type(e).__name__}")


def _int_power(base: np.ndarray, k: int) -> np.ndarray:
    # repeated squaring keeps real inputs real to the last bit
    if k < 0:
        return 1.0 / _int_power(base, -k)
    result = np.ones_like(base)
    sq = base
    while k:
        if k & 1:
            result = result * sq
        k >>= 1
        if k:
            sq = sq * sq
    return result
