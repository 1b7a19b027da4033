"""Closed-form coupling functions lambda(x, y).

Grammar (whitespace ignored)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'

Evaluation works on floats or numpy arrays and is pure.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "abs": np.abs,
}
VARIABLES = ("x", "y")


class ParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, src):
        self.src = src
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _expect(self, ch):
        if self._peek() != ch:
            found = repr(self.src[self.pos]) if self.pos < len(self.src) else "end of input"
            raise ParseError(f"expected {ch!r}, found {found}", self.pos)
        self.pos += 1

    def parse(self):
        node = self.expr()
        if self._peek():
            raise ParseError(f"unexpected {self.src[self.pos]!r}", self.pos)
        return node

    def expr(self):
        node = self.term()
        while self._peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self._peek() in ("*", "/"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self._peek() == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self._peek() == "^":
            self.pos += 1
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        ch = self._peek()
        start = self.pos
        if not ch:
            raise ParseError("unexpected end of input", start)
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self._expect(")")
            return node
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group(0)))
        m = _NAME.match(self.src, self.pos)
        if m:
            name = m.group(0)
            self.pos = m.end()
            if name in VARIABLES:
                return Var(name)
            if name in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(name, arg)
            raise ParseError(f"unknown identifier {name!r}", start)
        raise ParseError(f"unexpected {ch!r}", start)


def parse(src):
    if not isinstance(src, str):
        raise TypeError("expression source must be a string")
    return CouplingExpr(_Parser(src).parse(), src)


def to_source(node):
    """Fully parenthesized source; parse(to_source(n)) reproduces n."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


def _eval(node, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else y
    if isinstance(node, Neg):
        return -_eval(node.arg, x, y)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, x, y))
    a = _eval(node.left, x, y)
    c = _eval(node.right, x, y)
    if node.op == "+":
        return a + c
    if node.op == "-":
        return a - c
    if node.op == "*":
        return a * c
    if node.op == "/":
        if np.any(np.asarray(c) == 0):
            raise EvalError(f"division by zero in {to_source(node)}")
        return a / c
    if np.any((np.asarray(a) == 0) & (np.asarray(c) < 0)):
        raise EvalError(f"zero raised to a negative power in {to_source(node)}")
    with np.errstate(invalid="ignore"):
        return np.power(np.asarray(a, dtype=float), c)


@dataclass(frozen=True)
class CouplingExpr:
    root: object
    source: str = ""

    def __call__(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.asarray(_eval(self.root, x, y), dtype=np.float64)
        out = np.broadcast_to(out, np.broadcast_shapes(x.shape, y.shape))
        return float(out) if out.ndim == 0 else np.array(out)

    def eval(self, x, y):
        return self(x, y)

    def __str__(self):
        return self.source or to_source(self.root)

    @property
    def is_constant(self):
        return isinstance(self.root, Num) or (
            isinstance(self.root, Neg) and isinstance(self.root.arg, Num))

    @property
    def is_zero(self):
        return self.is_constant and self(0.0, 0.0) == 0.0


def as_coupling(lam):
    """Accept a CouplingExpr, expression string, or real number."""
    if isinstance(lam, CouplingExpr):
        return lam
    if isinstance(lam, str):
        return parse(lam)
    if isinstance(lam, (complex, np.complexfloating)) and not isinstance(lam, (float, int)):
        raise TypeError("coupling must be real-valued")
    value = float(lam)
    if not math.isfinite(value):
        raise ValueError("coupling constant must be finite")
    return CouplingExpr(Num(value), repr(value))
