"""Scalar expression DSL in one variable ``x``.

Grammar (standard precedence, ``+ - * /`` left-associative, ``^`` binds
tighter than unary minus and associates to the right)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | ('exp' | 'log') '(' expr ')' | '(' expr ')'

Exponents must fold to a constant.  Constant subtrees are folded at parse
time; no other simplification is performed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

Number = Union[float, np.ndarray]


class ExprError(Exception):
    pass


class ParseError(ExprError, ValueError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class EvalError(ExprError, ArithmeticError):
    pass


class DomainError(EvalError):
    """Evaluation outside the natural domain (log of x<=0, 0 to a negative power...)."""


class EvalOverflowError(EvalError):
    pass


# ---------------------------------------------------------------------------
# AST nodes

class Expr:
    precedence = 5

    @cached_property
    def _scalar_fn(self) -> Callable[[float], float]:
        return _compile_scalar(self)

    @cached_property
    def _array_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        return _compile_array(self)

    @cached_property
    def derivative(self) -> Expr:
        return differentiate(self)

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    pass


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr
    precedence = 1


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence = 1


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence = 2


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr
    precedence = 2


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    precedence = 3


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: float
    precedence = 4


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Log(Expr):
    arg: Expr


X = Var()
FUNCTIONS = {"exp": Exp, "log": Log}


# ---------------------------------------------------------------------------
# Constant folding constructors

def _folded(node: Expr) -> Expr:
    """Replace ``node`` by a constant when all of its leaves are constants.

    Nodes whose value would be non-finite or outside the domain stay
    unfolded so that evaluation reports the problem.
    """
    if isinstance(node, (Const, Var)):
        return node
    children = _children(node)
    if all(isinstance(c, Const) for c in children):
        try:
            value = eval_expr(node, 0.0)
        except EvalError:
            return node
        return Const(value)
    return node


def _children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Add, Sub, Mul, Div)):
        return (node.left, node.right)
    if isinstance(node, (Neg, Exp, Log)):
        return (node.arg,)
    if isinstance(node, Pow):
        return (node.base,)
    return ()


def compose(outer: Expr, inner: Expr) -> Expr:
    """Substitute ``inner`` for ``x`` in ``outer``."""
    if isinstance(outer, Var):
        return inner
    if isinstance(outer, Const):
        return outer
    if isinstance(outer, Pow):
        return _folded(Pow(compose(outer.base, inner), outer.exponent))
    if isinstance(outer, (Neg, Exp, Log)):
        return _folded(type(outer)(compose(outer.arg, inner)))
    return _folded(type(outer)(compose(outer.left, inner), compose(outer.right, inner)))


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ParseError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = text or "end of input"
            raise ParseError(f"unexpected {found!r}", pos, (repr(value),))

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos, ("operator", "end of input"))
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = _folded(Add(node, rhs) if op == "+" else Sub(node, rhs))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = _folded(Mul(node, rhs) if op == "*" else Div(node, rhs))
        return node

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return _folded(Neg(self.unary()))
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            start = self.peek()[2]
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ParseError("exponent must be a constant", start)
            return _folded(Pow(base, exponent.value))
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ParseError(f"literal {text!r} overflows", pos)
            return Const(value)
        if kind == "name":
            if text == "x":
                return X
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _folded(FUNCTIONS[text](arg))
            raise ParseError(f"unknown identifier {text!r}", pos, ("x", "exp", "log"))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise ParseError(f"unexpected {found!r}", pos, ("number", "x", "exp", "log", "'('"))


def parse_expr(source: str) -> Expr:
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Serialization

def _fmt(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(node: Expr) -> int:
    if isinstance(node, Const) and node.value < 0:
        return Neg.precedence
    return node.precedence


def serialize(node: Expr) -> str:
    """Render ``node`` so that ``parse_expr`` rebuilds the same tree."""

    def wrap(child: Expr, min_prec: int) -> str:
        s = serialize(child)
        return f"({s})" if _prec(child) < min_prec else s

    if isinstance(node, Const):
        return _fmt(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, (Add, Sub)):
        op = " + " if isinstance(node, Add) else " - "
        return wrap(node.left, 1) + op + wrap(node.right, 2)
    if isinstance(node, (Mul, Div)):
        op = "*" if isinstance(node, Mul) else "/"
        return wrap(node.left, 2) + op + wrap(node.right, 3)
    if isinstance(node, Neg):
        return "-" + wrap(node.arg, 3)
    if isinstance(node, Pow):
        e = _fmt(node.exponent)
        if node.exponent < 0:
            e = f"({e})"
        return wrap(node.base, 5) + "^" + e
    if isinstance(node, Exp):
        return f"exp({serialize(node.arg)})"
    if isinstance(node, Log):
        return f"log({serialize(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation

def _check_scalar(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise EvalOverflowError(f"{what} is not finite")
    return v


def _compile_scalar(node: Expr) -> Callable[[float], float]:
    if isinstance(node, Const):
        c = node.value
        return lambda x: c
    if isinstance(node, Var):
        return lambda x: x
    if isinstance(node, Neg):
        a = _compile_scalar(node.arg)
        return lambda x: -a(x)
    if isinstance(node, (Add, Sub, Mul)):
        a, b = _compile_scalar(node.left), _compile_scalar(node.right)
        if isinstance(node, Add):
            return lambda x: _check_scalar(a(x) + b(x), "sum")
        if isinstance(node, Sub):
            return lambda x: _check_scalar(a(x) - b(x), "difference")
        return lambda x: _check_scalar(a(x) * b(x), "product")
    if isinstance(node, Div):
        a, b = _compile_scalar(node.left), _compile_scalar(node.right)

        def div(x):
            d = b(x)
            if d == 0.0:
                raise DomainError("division by zero")
            return _check_scalar(a(x) / d, "quotient")

        return div
    if isinstance(node, Pow):
        a = _compile_scalar(node.base)
        e = node.exponent
        integral = e.is_integer()

        def power(x):
            base = a(x)
            if base < 0.0 and not integral:
                raise DomainError(f"negative base {base!r} to non-integer power {e!r}")
            if base == 0.0 and (e < 0 or not integral):
                if e < 0:
                    raise DomainError(f"zero to negative power {e!r}")
                raise DomainError(f"zero base to non-integer power {e!r}")
            try:
                return _check_scalar(base ** e, "power")
            except OverflowError:
                raise EvalOverflowError("power overflow") from None

        return power
    if isinstance(node, Exp):
        a = _compile_scalar(node.arg)

        def exp(x):
            try:
                return math.exp(a(x))
            except OverflowError:
                raise EvalOverflowError("exp overflow") from None

        return exp
    if isinstance(node, Log):
        a = _compile_scalar(node.arg)

        def log(x):
            v = a(x)
            if v <= 0.0:
                raise DomainError(f"log of non-positive value {v!r}")
            return math.log(v)

        return log
    raise TypeError(f"not an expression node: {node!r}")


def _check_array(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise EvalOverflowError(f"{what} is not finite")
    return v


def _compile_array(node: Expr) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(node, Const):
        c = node.value
        return lambda x: np.full(np.shape(x), c)
    if isinstance(node, Var):
        return lambda x: x
    if isinstance(node, Neg):
        a = _compile_array(node.arg)
        return lambda x: -a(x)
    if isinstance(node, (Add, Sub, Mul)):
        a, b = _compile_array(node.left), _compile_array(node.right)
        op = {Add: np.add, Sub: np.subtract, Mul: np.multiply}[type(node)]
        return lambda x: _check_array(op(a(x), b(x)), type(node).__name__.lower())
    if isinstance(node, Div):
        a, b = _compile_array(node.left), _compile_array(node.right)

        def div(x):
            d = b(x)
            if np.any(d == 0.0):
                raise DomainError("division by zero")
            return _check_array(a(x) / d, "quotient")

        return div
    if isinstance(node, Pow):
        a = _compile_array(node.base)
        e = node.exponent
        integral = e.is_integer()

        def power(x):
            base = a(x)
            if not integral and np.any(base <= 0.0):
                raise DomainError(f"non-positive base to non-integer power {e!r}")
            if e < 0 and np.any(base == 0.0):
                raise DomainError(f"zero to negative power {e!r}")
            return _check_array(np.power(base, e), "power")

        return power
    if isinstance(node, Exp):
        a = _compile_array(node.arg)
        return lambda x: _check_array(np.exp(a(x)), "exp")
    if isinstance(node, Log):
        a = _compile_array(node.arg)

        def log(x):
            v = a(x)
            if np.any(v <= 0.0):
                raise DomainError("log of non-positive value")
            return np.log(v)

        return log
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr(e: Expr, x: float) -> float:
    """Evaluate ``e`` at the scalar ``x``; raises :class:`EvalError` instead of returning NaN/inf."""
    if not math.isfinite(x):
        raise DomainError(f"non-finite argument {x!r}")
    return e._scalar_fn(float(x))


def eval_array(e: Expr, xs) -> np.ndarray:
    """Vectorized :func:`eval_expr`; any bad element raises for the whole array."""
    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        out = e._array_fn(xs)
    return np.array(np.broadcast_to(out, xs.shape), dtype=float)


# ---------------------------------------------------------------------------
# Differentiation

def _add(a: Expr, b: Expr) -> Expr:
    if a == Const(0.0):
        return b
    if b == Const(0.0):
        return a
    return _folded(Add(a, b))


def _sub(a: Expr, b: Expr) -> Expr:
    if b == Const(0.0):
        return a
    if a == Const(0.0):
        return _folded(Neg(b))
    return _folded(Sub(a, b))


def _mul(a: Expr, b: Expr) -> Expr:
    # zero and unit factors only; this keeps second derivatives readable
    if a == Const(0.0) or b == Const(0.0):
        return Const(0.0)
    if a == Const(1.0):
        return b
    if b == Const(1.0):
        return a
    return _folded(Mul(a, b))


def _div(a: Expr, b: Expr) -> Expr:
    if a == Const(0.0):
        return Const(0.0)
    if b == Const(1.0):
        return a
    return _folded(Div(a, b))


def _pow(a: Expr, e: float) -> Expr:
    if e == 1.0:
        return a
    return _folded(Pow(a, e))


def differentiate(e: Expr) -> Expr:
    """Symbolic d/dx of ``e``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Add):
        return _add(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Sub):
        return _sub(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Mul):
        return _add(_mul(differentiate(e.left), e.right), _mul(e.left, differentiate(e.right)))
    if isinstance(e, Div):
        num = _sub(_mul(differentiate(e.left), e.right), _mul(e.left, differentiate(e.right)))
        return _div(num, _pow(e.right, 2.0))
    if isinstance(e, Neg):
        d = differentiate(e.arg)
        return Const(0.0) if d == Const(0.0) else _folded(Neg(d))
    if isinstance(e, Pow):
        if e.exponent == 0.0:
            return Const(0.0)
        outer = _mul(Const(e.exponent), _pow(e.base, e.exponent - 1.0)) if e.exponent != 1.0 else Const(1.0)
        return _mul(outer, differentiate(e.base))
    if isinstance(e, Exp):
        return _mul(e, differentiate(e.arg))
    if isinstance(e, Log):
        return _div(differentiate(e.arg), e.arg)
    raise TypeError(f"not an expression node: {e!r}")


def sum_exprs(terms) -> Expr:
    terms = list(terms)
    if not terms:
        return Const(0.0)
    total = terms[0]
    for t in terms[1:]:
        total = _folded(Add(total, t))
    return total
