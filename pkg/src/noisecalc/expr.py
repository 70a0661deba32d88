"""A small arithmetic expression language for config-defined coefficients.

Grammar, precedence low to high::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := primary ('^' factor)?          # right-associative
    primary := number | 'x' | 't' | ident '(' expr ')' | '(' expr ')'

with ``ident`` one of sin, cos, exp, log, sqrt, tanh, abs, and numbers
decimal with an optional exponent.  There is no implicit multiplication:
``2x`` is a syntax error.  Unary minus binds looser than ``^``, so
``-x^2`` reads as ``-(x^2)``; exponentiation is right-associative, so
``x^3^2 == x^9``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Expr",
    "ExprSyntaxError",
    "ExprEvalError",
    "DerivativeUnsupportedError",
    "parse",
    "evaluate",
    "derivative",
    "to_source",
    "vector_fn",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "abs")
VARIABLES = ("x", "t")

_MATH_FN = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log,
    "sqrt": math.sqrt, "tanh": math.tanh, "abs": abs,
}
_NUMPY_FN = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "tanh": np.tanh, "abs": np.abs,
}


class ExprSyntaxError(ValueError):
    """Parse failure; carries the source position and what was expected."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class ExprEvalError(ArithmeticError):
    """Evaluation failure; carries the source span and the (x, t) inputs."""

    def __init__(self, message: str, pos: int, x: float, t: float):
        super().__init__(f"{message} (at position {pos}, x={x}, t={t})")
        self.pos = pos
        self.x = x
        self.t = t


class DerivativeUnsupportedError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    pos: int = field(compare=False)


@dataclass(frozen=True)
class Num(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Var(Node):
    name: str = "x"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node = None


@dataclass(frozen=True)
class Bin(Node):
    op: str = "+"
    left: Node = None
    right: Node = None


@dataclass(frozen=True)
class Call(Node):
    fn: str = "sin"
    arg: Node = None


@dataclass(frozen=True)
class Expr:
    """A parsed expression; free variables are a subset of {x, t}."""

    root: Node
    source: str

    def __call__(self, x: float, t: float = 0.0) -> float:
        return evaluate(self, x, t)


# --- tokenizer -------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            tokens.append(("number", src[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(("ident", src[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("eof", "", n))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", pos)
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected trailing input {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Bin(pos, text, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Bin(pos, text, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(pos, self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Bin(pos, "^", base, self.factor())
        return base

    def primary(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "number":
            return Num(pos, float(text))
        if kind == "ident":
            if text in VARIABLES:
                return Var(pos, text)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(pos, text, arg)
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            f"expected a number, variable, function, or '(', found {text or 'end of input'!r}",
            pos,
        )


def parse(source: str) -> Expr:
    """Parse UTF-8 text into an expression tree."""
    return Expr(_Parser(source).parse(), source)


# --- evaluation ------------------------------------------------------------


def _eval_node(node: Node, x: float, t: float) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else t
    if isinstance(node, Neg):
        return -_eval_node(node.arg, x, t)
    if isinstance(node, Bin):
        a = _eval_node(node.left, x, t)
        b = _eval_node(node.right, x, t)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0.0:
                raise ExprEvalError("division by zero", node.pos, x, t)
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError) as exc:
            raise ExprEvalError(f"invalid power {a}^{b}: {exc}", node.pos, x, t) from None
    if isinstance(node, Call):
        v = _eval_node(node.arg, x, t)
        try:
            return float(_MATH_FN[node.fn](v))
        except (ValueError, OverflowError) as exc:
            raise ExprEvalError(f"{node.fn}({v}) undefined: {exc}", node.pos, x, t) from None
    raise TypeError(f"unknown node {node!r}")


def evaluate(e: Expr, x: float, t: float = 0.0) -> float:
    """Evaluate with standard real semantics; domain errors raise
    :class:`ExprEvalError` carrying the offending (x, t)."""
    return _eval_node(e.root, float(x), float(t))


def _numpy_node(node: Node, x, t):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else t
    if isinstance(node, Neg):
        return -_numpy_node(node.arg, x, t)
    if isinstance(node, Bin):
        a = _numpy_node(node.left, x, t)
        b = _numpy_node(node.right, x, t)
        return {"+": np.add, "-": np.subtract, "*": np.multiply,
                "/": np.divide, "^": np.power}[node.op](a, b)
    return _NUMPY_FN[node.fn](_numpy_node(node.arg, x, t))


def vector_fn(e: Expr) -> Callable:
    """A numpy-vectorized ``(x, t) -> array`` view of the expression.

    Domain violations propagate as NaN/inf instead of raising; callers that
    need strict errors should use :func:`evaluate`.
    """
    def fn(x, t=0.0):
        with np.errstate(all="ignore"):
            out = _numpy_node(e.root, np.asarray(x, dtype=float), t)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy() \
            if np.shape(out) != np.shape(x) else out
    return fn


# --- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _print_node(node: Node, parent_prec: int) -> str:
    if isinstance(node, Num):
        v = node.value
        text = repr(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
        return text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _print_node(node.arg, _PREC["neg"])
        text = f"-{inner}"
        return f"({text})" if parent_prec > _PREC["neg"] else text
    if isinstance(node, Call):
        return f"{node.fn}({_print_node(node.arg, 0)})"
    prec = _PREC[node.op]
    if node.op == "^":
        # left operand must be primary-level; right side admits unary minus
        left = _print_node(node.left, _PREC["atom"])
        right = _print_node(node.right, _PREC["neg"])
        text = f"{left}^{right}"
    else:
        left = _print_node(node.left, prec)
        right = _print_node(node.right, prec + 1)
        text = f"{left} {node.op} {right}"
    return f"({text})" if parent_prec > prec else text


def to_source(e: Expr) -> str:
    """Canonical printed form; reparsing reproduces the same tree."""
    return _print_node(e.root, 0)


# --- symbolic derivative ---------------------------------------------------


def _num(v: float) -> Node:
    return Num(0, float(v))


def _is_num(node: Node, value: float | None = None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def _add(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return _num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Bin(0, "+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return _num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return Neg(0, b)
    return Bin(0, "-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_num(a) and _is_num(b):
        return _num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return Bin(0, "*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0):
        return _num(0.0)
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b) and b.value != 0:
        return _num(a.value / b.value)
    return Bin(0, "/", a, b)


def _pow(a: Node, b: Node) -> Node:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return _num(1.0)
    if _is_num(a) and _is_num(b):
        return _num(math.pow(a.value, b.value))
    return Bin(0, "^", a, b)


def _diff(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return _num(0.0)
    if isinstance(node, Var):
        return _num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return Neg(node.pos, _diff(node.arg, var))
    if isinstance(node, Bin):
        u, v = node.left, node.right
        du, dv = _diff(u, var), _diff(v, var)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, _num(2.0)))
        # power: constant exponent and constant base get the short forms
        if _is_num(v):
            return _mul(_mul(v, _pow(u, _num(v.value - 1.0))), du)
        if _is_num(u):
            return _mul(_mul(node, _num(math.log(u.value))), dv)
        # u^v = exp(v log u):  d = u^v (dv log u + v du / u)
        return _mul(node, _add(_mul(dv, Call(0, "log", u)), _div(_mul(v, du), u)))
    if isinstance(node, Call):
        u = node.arg
        du = _diff(u, var)
        if node.fn == "abs":
            raise DerivativeUnsupportedError(
                "abs is not differentiable; fall back to finite differences"
            )
        if node.fn == "sin":
            outer = Call(0, "cos", u)
        elif node.fn == "cos":
            outer = Neg(0, Call(0, "sin", u))
        elif node.fn == "exp":
            outer = Call(0, "exp", u)
        elif node.fn == "log":
            outer = _div(_num(1.0), u)
        elif node.fn == "sqrt":
            outer = _div(_num(1.0), _mul(_num(2.0), Call(0, "sqrt", u)))
        elif node.fn == "tanh":
            outer = _sub(_num(1.0), _pow(Call(0, "tanh", u), _num(2.0)))
        else:
            raise DerivativeUnsupportedError(f"no derivative rule for {node.fn}")
        return _mul(outer, du)
    raise TypeError(f"unknown node {node!r}")


def derivative(e: Expr, var: str = "x") -> Expr:
    """Symbolic derivative with constant folding, nothing fancier.

    ``abs`` in the tree raises :class:`DerivativeUnsupportedError`; callers
    should fall back to finite differences.
    """
    if var not in VARIABLES:
        raise ValueError(f"can only differentiate in {VARIABLES}, got {var!r}")
    root = _diff(e.root, var)
    text = _print_node(root, 0)
    return Expr(root, text)
