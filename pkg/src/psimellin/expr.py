"""Scalar expressions of one real variable.

The grammar is deliberately small::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := NUMBER | 'x' | IDENT '(' expr ')' | '(' expr ')'

so unary minus binds looser than ``^``: ``-x^2`` is ``-(x^2)``.

with ``IDENT`` one of ``exp, ln, sin, cos, sqrt, abs``. Parsed trees evaluate
vectorized over :mod:`numpy` arrays and differentiate exactly into new trees.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt", "abs")


class ExprSyntaxError(ValueError):
    """Raised for malformed expression text; carries the byte offset."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(ValueError):
    """Raised when a scalar evaluation leaves the domain of the expression."""


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def evaluate(self, x):
        """Evaluate with numpy semantics (``nan``/``inf`` propagate silently)."""
        raise NotImplementedError

    def derivative(self) -> Expr:
        raise NotImplementedError

    def substitute(self, inner: Expr) -> Expr:
        """Return the composition ``self(inner(x))``."""
        raise NotImplementedError

    def __call__(self, x: float) -> float:
        with np.errstate(all="ignore"):
            value = float(self.evaluate(np.float64(x)))
        if math.isnan(value):
            raise DomainError(f"{self} is undefined at x={x!r}")
        return value

    def __str__(self) -> str:
        return to_string(self)

    # arithmetic sugar so trees can be assembled in code
    def __add__(self, other: Expr | float) -> Expr:
        return add(self, _lift(other))

    def __radd__(self, other: float) -> Expr:
        return add(_lift(other), self)

    def __sub__(self, other: Expr | float) -> Expr:
        return sub(self, _lift(other))

    def __rsub__(self, other: float) -> Expr:
        return sub(_lift(other), self)

    def __mul__(self, other: Expr | float) -> Expr:
        return mul(self, _lift(other))

    def __rmul__(self, other: float) -> Expr:
        return mul(_lift(other), self)

    def __truediv__(self, other: Expr | float) -> Expr:
        return div(self, _lift(other))

    def __rtruediv__(self, other: float) -> Expr:
        return div(_lift(other), self)

    def __pow__(self, other: Expr | float) -> Expr:
        return power(self, _lift(other))

    def __neg__(self) -> Expr:
        return neg(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float

    def evaluate(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def derivative(self) -> Expr:
        return ZERO

    def substitute(self, inner: Expr) -> Expr:
        return self


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    def evaluate(self, x):
        return np.asarray(x, dtype=float)

    def derivative(self) -> Expr:
        return ONE

    def substitute(self, inner: Expr) -> Expr:
        return inner


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr

    def evaluate(self, x):
        return -self.arg.evaluate(x)

    def derivative(self) -> Expr:
        return neg(self.arg.derivative())

    def substitute(self, inner: Expr) -> Expr:
        return neg(self.arg.substitute(inner))


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, x):
        if self.op == "-" and _is_const(self.right, 1.0) and isinstance(self.left, Func) \
                and self.left.name == "exp":
            return np.expm1(self.left.arg.evaluate(x))
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return _pow(a, b)

    def derivative(self) -> Expr:
        u, v = self.left, self.right
        du, dv = u.derivative(), v.derivative()
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        if self.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
        # power
        if isinstance(v, Const):
            return mul(mul(v, power(u, Const(v.value - 1.0))), du)
        # u^v = exp(v ln u)
        return mul(self, add(mul(dv, Func("ln", u)), div(mul(v, du), u)))

    def substitute(self, inner: Expr) -> Expr:
        return _binop(self.op, self.left.substitute(inner), self.right.substitute(inner))


@dataclass(frozen=True, eq=True, repr=True)
class Func(Expr):
    name: str
    arg: Expr

    def evaluate(self, x):
        if self.name == "ln":
            rest = _one_plus(self.arg)
            if rest is not None:
                return np.log1p(rest.evaluate(x))
        return _NUMPY_FUNCS[self.name](self.arg.evaluate(x))

    def derivative(self) -> Expr:
        u = self.arg
        du = u.derivative()
        name = self.name
        if name == "exp":
            outer: Expr = self
        elif name == "ln":
            outer = div(ONE, u)
        elif name == "sin":
            outer = Func("cos", u)
        elif name == "cos":
            outer = neg(Func("sin", u))
        elif name == "sqrt":
            outer = div(ONE, mul(Const(2.0), self))
        else:
            outer = Sign(u)
        return mul(outer, du)

    def substitute(self, inner: Expr) -> Expr:
        return Func(self.name, self.arg.substitute(inner))


@dataclass(frozen=True, eq=True, repr=True)
class Sign(Expr):
    """Derivative of ``abs``; not reachable from the grammar."""

    arg: Expr

    def evaluate(self, x):
        return np.sign(self.arg.evaluate(x))

    def derivative(self) -> Expr:
        return ZERO

    def substitute(self, inner: Expr) -> Expr:
        return Sign(self.arg.substitute(inner))


def _one_plus(e: Expr) -> Expr | None:
    """Return ``u`` if *e* is ``1 + u`` or ``u + 1`` (evaluated with log1p)."""
    if isinstance(e, BinOp) and e.op == "+":
        if _is_const(e.left, 1.0):
            return e.right
        if _is_const(e.right, 1.0):
            return e.left
    return None


ZERO = Const(0.0)
ONE = Const(1.0)
X = Var()


def _pow(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(all="ignore"):
        out = np.power(a, b)
    # 0^negative is +inf (the expression genuinely blows up there)
    return out


_NUMPY_FUNCS: dict[str, Callable] = {
    "exp": np.exp,
    "ln": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


# {{{ smart constructors: fold constants and drop neutral elements


def _lift(value: Expr | float) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if isinstance(b, Neg):
        return BinOp("+", a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return ONE
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        value = _pow(a.value, b.value)
        if np.isfinite(value):
            return Const(float(value))
    return BinOp("^", a, b)


def _binop(op: str, a: Expr, b: Expr) -> Expr:
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[op](a, b)


# }}}


# {{{ parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        assert kind is not None
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(source, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, n)))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, variable: str = "x",
                 functions: tuple[str, ...] = FUNCTIONS) -> None:
        self.tokens = _tokenize(source)
        self.i = 0
        self.variable = variable
        self.functions = functions

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, offset = self.take()
        if value != text or kind != "op":
            found = value or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", offset)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", offset)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.factor())
        base = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def base(self) -> Expr:
        kind, value, offset = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if value == self.variable:
                return X
            if value not in self.functions:
                raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(value, arg)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = value or "end of input"
        raise ExprSyntaxError(f"unexpected token {found!r}", offset)


def parse_expr(source: str, variable: str = "x",
               functions: tuple[str, ...] = FUNCTIONS) -> Expr:
    """Parse *source* into an expression tree.

    *variable* names the independent variable; *functions* lists the accepted
    function names (extra names, such as ``gamma`` for transform-side
    expressions, have no real-variable evaluation and must be handled by the
    caller). Raises :class:`ExprSyntaxError` (with the byte offset of the
    offending token) for malformed input and unknown identifiers.
    """
    return _Parser(source, variable, functions).parse()


# }}}


# {{{ canonical printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _fmt_number(value: float) -> str:
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite constant {value}")
    text = text.removesuffix(".0")
    return text


def to_string(e: Expr) -> str:
    """Print *e* so that ``parse_expr(to_string(e)) == e`` holds structurally."""
    return _fmt(e, 0)


def _fmt(e: Expr, parent: int, *, right: bool = False) -> str:
    if isinstance(e, Const):
        text = _fmt_number(abs(e.value))
        if e.value < 0 or (e.value == 0 and math.copysign(1.0, e.value) < 0):
            # a negative literal parses as Neg(Const), keep the structure explicit
            return f"(-{text})" if parent > 0 else f"-{text}"
        return text
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        inner = _fmt(e.arg, 4)
        return f"(-{inner})" if parent > 0 else f"-{inner}"
    if isinstance(e, Func):
        return f"{e.name}({_fmt(e.arg, 0)})"
    if isinstance(e, Sign):
        raise ValueError("sign() is internal and has no textual form")
    assert isinstance(e, BinOp)
    prec = _PREC[e.op]
    if e.op == "^":
        text = f"{_fmt(e.left, prec + 1)}^{_fmt(e.right, prec, right=True)}"
    else:
        text = f"{_fmt(e.left, prec)}{e.op}{_fmt(e.right, prec + 1)}"
    needs_parens = prec < parent or (prec == parent and right and e.op != "^")
    return f"({text})" if needs_parens else text


# }}}


def as_expr(value: Expr | str | float) -> Expr:
    """Coerce text, numbers and trees to an :class:`Expr`."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse_expr(value)
    return Const(float(value))


def log_of(e: Expr) -> Expr:
    """``ln(e)`` with ``ln(exp u) = u``, ``ln(a b) = ln a + ln b``, ``ln(a^c) = c ln a``.

    The rewrites assume positive arguments; they keep quotients such as
    ``exp(-x/2)' / exp(-x/2)`` from turning into ``0/0`` when the factors
    underflow.
    """
    e = as_expr(e)
    if isinstance(e, Const):
        with np.errstate(divide="ignore", invalid="ignore"):
            return Const(float(np.log(e.value)))
    if isinstance(e, Func) and e.name == "exp":
        return e.arg
    if isinstance(e, Func) and e.name == "sqrt":
        return mul(Const(0.5), log_of(e.arg))
    if isinstance(e, BinOp):
        if e.op == "*":
            return add(log_of(e.left), log_of(e.right))
        if e.op == "/":
            return sub(log_of(e.left), log_of(e.right))
        if e.op == "^" and isinstance(e.right, Const):
            return mul(e.right, log_of(e.left))
    return Func("ln", e)
