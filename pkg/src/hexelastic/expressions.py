"""Scalar fields in the chart variables x, y: parsing, evaluation, symbolic derivatives.

The grammar is deliberately tiny: numbers, the variables x and y, the
constants pi and e, the binary operators + - * / ^ (with ^ binding
tightest and associating to the right), unary minus, and the unary
functions sin, cos, exp, log, sqrt.  Expressions are immutable after
parsing and can be evaluated on scalars or numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "FieldError",
    "FieldSyntaxError",
    "FieldDomainError",
    "ScalarFieldExpr",
    "parse_field",
    "const_field",
    "eval_field",
    "eval_gradient",
    "eval_hessian",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("x", "y")


class FieldError(ValueError):
    """Base class for expression errors."""


class FieldSyntaxError(FieldError):
    """Malformed source, unknown identifier or arity mismatch.

    ``offset`` is the byte offset of the offending token in the source.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class FieldDomainError(FieldError):
    """Evaluation left the natural domain (log of nonpositive, division by zero...)."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in subexpression '{subexpr}'")
        self.subexpr = subexpr


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 2, "^": 4}


@dataclass(frozen=True)
class Node:
    def source(self) -> str:
        raise NotImplementedError

    # precedence used when deciding parenthesization of children
    prec = 5


@dataclass(frozen=True)
class Num(Node):
    value: float

    def source(self):
        return repr(self.value)


@dataclass(frozen=True)
class Const(Node):
    name: str

    def source(self):
        return self.name


@dataclass(frozen=True)
class Var(Node):
    name: str

    def source(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    prec = _PREC["neg"]

    def source(self):
        inner = self.arg.source()
        if self.arg.prec < self.prec or isinstance(self.arg, Neg):
            inner = f"({inner})"
        return f"-{inner}"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    @property
    def prec(self):
        return _PREC[self.op]

    def source(self):
        lp, rp = self.left.prec, self.right.prec
        ls, rs = self.left.source(), self.right.source()
        if self.op == "^":
            # right associative; also guard a unary-minus base
            if lp <= self.prec or isinstance(self.left, Neg):
                ls = f"({ls})"
            if rp < self.prec:
                rs = f"({rs})"
        else:
            if lp < self.prec:
                ls = f"({ls})"
            # -, / are left associative; parenthesize an equal-precedence right child
            if rp < self.prec or (rp == self.prec and self.op in ("-", "/")) or (
                self.op == "*" and isinstance(self.right, Neg)
            ) or (self.op == "/" and isinstance(self.right, Neg)):
                rs = f"({rs})"
        return f"{ls} {self.op} {rs}" if self.op in "+-" else f"{ls}{self.op}{rs}"


@dataclass(frozen=True)
class Call(Node):
    fn: str
    arg: Node

    def source(self):
        return f"{self.fn}({self.arg.source()})"


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            # skip trailing whitespace
            if source[pos:].strip() == "":
                break
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise FieldSyntaxError(f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, value, pos = self.peek()
        if kind != "op" or value != op:
            raise FieldSyntaxError(f"expected '{op}'", pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise FieldSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = BinOp(value, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = BinOp(value, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, value, pos = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in VARIABLES:
                return Var(value)
            if value in CONSTANTS:
                return Const(value)
            if value in FUNCTIONS:
                nk, nv, npos = self.peek()
                if nk != "op" or nv != "(":
                    raise FieldSyntaxError(
                        f"function '{value}' takes exactly one parenthesized argument", npos
                    )
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            raise FieldSyntaxError(f"unknown identifier '{value}'", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise FieldSyntaxError(
            "expected a number, identifier or '('" if kind != "end" else "unexpected end of input",
            pos,
        )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _eval_node(node: Node, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return x if node.name == "x" else y
    if isinstance(node, Neg):
        return -_eval_node(node.arg, x, y)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, x, y)
        b = _eval_node(node.right, x, y)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise FieldDomainError("division by zero", node.source())
            return a / b
        # '^'
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.power(a, b)
        if np.any(~np.isfinite(out)):
            raise FieldDomainError("power outside real domain", node.source())
        return out
    if isinstance(node, Call):
        a = _eval_node(node.arg, x, y)
        if node.fn == "sin":
            return np.sin(a)
        if node.fn == "cos":
            return np.cos(a)
        if node.fn == "exp":
            return np.exp(a)
        if node.fn == "log":
            if np.any(a <= 0):
                raise FieldDomainError("log of nonpositive value", node.source())
            return np.log(a)
        if node.fn == "sqrt":
            if np.any(a < 0):
                raise FieldDomainError("sqrt of negative value", node.source())
            return np.sqrt(a)
    raise TypeError(f"unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Symbolic differentiation (with light simplification to keep trees small)
# ---------------------------------------------------------------------------


def _is_num(node, value=None):
    return isinstance(node, Num) and (value is None or node.value == value)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return Neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a, b):
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return BinOp("^", a, b)


def _neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _diff(node: Node, var: str) -> Node:
    if isinstance(node, (Num, Const)):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return _neg(_diff(node.arg, var))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _diff(u, var), _diff(v, var)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, Num(2.0)))
        # u ^ v
        if _is_num(v):
            return _mul(_mul(v, _pow(u, Num(v.value - 1.0))), du)
        # general case: u^v * (dv*log u + v*du/u)
        return _mul(
            _pow(u, v),
            _add(_mul(dv, Call("log", u)), _div(_mul(v, du), u)),
        )
    if isinstance(node, Call):
        da = _diff(node.arg, var)
        a = node.arg
        if node.fn == "sin":
            outer = Call("cos", a)
        elif node.fn == "cos":
            outer = _neg(Call("sin", a))
        elif node.fn == "exp":
            outer = Call("exp", a)
        elif node.fn == "log":
            return _div(da, a)
        elif node.fn == "sqrt":
            return _div(da, _mul(Num(2.0), Call("sqrt", a)))
        else:  # pragma: no cover
            raise TypeError(node.fn)
        return _mul(outer, da)
    raise TypeError(f"unhandled node {node!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Public wrapper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarFieldExpr:
    """An immutable parsed scalar field of (x, y); thread-safe to evaluate."""

    source: str
    ast: Node

    def __call__(self, x, y):
        return _eval_node(self.ast, np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def to_source(self) -> str:
        return self.ast.source()

    def derivative(self, var: str) -> "ScalarFieldExpr":
        if var not in VARIABLES:
            raise ValueError(f"unknown variable {var!r}")
        node = _diff(self.ast, var)
        return ScalarFieldExpr(node.source(), node)

    @cached_property
    def dx(self) -> "ScalarFieldExpr":
        return self.derivative("x")

    @cached_property
    def dy(self) -> "ScalarFieldExpr":
        return self.derivative("y")

    @property
    def is_constant(self) -> bool:
        def has_var(node):
            if isinstance(node, Var):
                return True
            if isinstance(node, Neg):
                return has_var(node.arg)
            if isinstance(node, BinOp):
                return has_var(node.left) or has_var(node.right)
            if isinstance(node, Call):
                return has_var(node.arg)
            return False

        return not has_var(self.ast)

    def grad(self, x, y):
        return self.dx(x, y), self.dy(x, y)

    def hess(self, x, y):
        hxx = self.dx.dx(x, y)
        hxy = self.dx.dy(x, y)
        hyy = self.dy.dy(x, y)
        hxx, hxy, hyy = np.broadcast_arrays(
            np.asarray(hxx, dtype=float), np.asarray(hxy, dtype=float), np.asarray(hyy, dtype=float)
        )
        out = np.stack(
            [np.stack([hxx, hxy], axis=-1), np.stack([hxy, hyy], axis=-1)], axis=-2
        )
        return out

    # building combined fields programmatically (used for derived metrics)
    def _combine(self, other, op):
        other = as_field(other)
        node = BinOp(op, self.ast, other.ast)
        return ScalarFieldExpr(node.source(), node)

    def __add__(self, other):
        return self._combine(other, "+")

    def __radd__(self, other):
        return as_field(other)._combine(self, "+")

    def __sub__(self, other):
        return self._combine(other, "-")

    def __rsub__(self, other):
        return as_field(other)._combine(self, "-")

    def __mul__(self, other):
        return self._combine(other, "*")

    def __rmul__(self, other):
        return as_field(other)._combine(self, "*")

    def __truediv__(self, other):
        return self._combine(other, "/")

    def __pow__(self, other):
        return self._combine(other, "^")


def parse_field(source: str) -> ScalarFieldExpr:
    """Parse an expression string; raises FieldSyntaxError on malformed input."""
    if not isinstance(source, str) or source.strip() == "":
        raise FieldSyntaxError("empty expression", 0)
    return ScalarFieldExpr(source, _Parser(source).parse())


def const_field(value: float) -> ScalarFieldExpr:
    node = Num(float(value))
    return ScalarFieldExpr(node.source(), node)


def as_field(value) -> ScalarFieldExpr:
    if isinstance(value, ScalarFieldExpr):
        return value
    if isinstance(value, str):
        return parse_field(value)
    return const_field(float(value))


def eval_field(expr: ScalarFieldExpr, x, y):
    return expr(x, y)


def eval_gradient(expr: ScalarFieldExpr, x, y):
    return expr.grad(x, y)


def eval_hessian(expr: ScalarFieldExpr, x, y):
    return expr.hess(x, y)
