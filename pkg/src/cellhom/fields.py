"""Closed-form scalar fields given as expression strings.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*``/``/``, then ``+``/``-``; ``^`` is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x1`` .. ``xn``; functions are ``sin``, ``cos`` and ``exp``.
Evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ExpressionSyntaxError, UnknownIdentifier

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, xs):
        return self.value

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Pi:
    def eval(self, xs):
        return np.pi

    def __str__(self):
        return "pi"


@dataclass(frozen=True)
class Var:
    index: int  # zero-based

    def eval(self, xs):
        return xs[self.index]

    def __str__(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, xs):
        return -self.arg.eval(xs)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def eval(self, xs):
        return BINARY[self.op](self.left.eval(xs), self.right.eval(xs))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: object

    def eval(self, xs):
        return FUNCTIONS[self.name](self.arg.eval(xs))

    def __str__(self):
        return f"{self.name}({self.arg})"


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        match = _TOKEN.match(src, pos)
        if match is None or match.end() == pos:
            offset = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {src[offset]!r}", offset)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, n: int):
        self.tokens = _tokenize(src)
        self.pos = 0
        self.n = n

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, value, offset = self.peek()
        if value != text or kind != "op":
            what = "end of input" if kind == "end" else repr(value)
            raise ExpressionSyntaxError(f"expected {text!r}, found {what}", offset)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {value!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value == "pi":
                return Pi()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.peek()[:2] == ("op", ","):
                    raise ArityError(f"{value}() takes exactly one argument")
                self.expect(")")
                return Call(value, arg)
            var = re.fullmatch(r"x([1-9])", value)
            if var and int(var.group(1)) <= self.n:
                return Var(int(var.group(1)) - 1)
            raise UnknownIdentifier(f"unknown identifier {value!r} (dimension {self.n})")
        if (kind, value) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise ExpressionSyntaxError(f"unexpected {what}", offset)


@dataclass(frozen=True)
class FieldExpr:
    source: str
    n: int
    tree: object

    def __call__(self, *xs):
        """Evaluate at coordinates ``x1, ..., xn`` (scalars or broadcastable arrays)."""
        if len(xs) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(xs)}")
        xs = [np.asarray(x, dtype=float) for x in xs]
        out = self.tree.eval(xs)
        return np.broadcast_to(out, np.broadcast(*xs).shape) * 1.0

    def at_points(self, pts) -> np.ndarray:
        """Evaluate at an ``(..., n)`` array of points."""
        pts = np.asarray(pts, dtype=float)
        return self(*np.moveaxis(pts, -1, 0))

    def __str__(self):
        return str(self.tree)

    @property
    def is_constant(self) -> bool:
        return not _has_var(self.tree)


def _has_var(node) -> bool:
    if isinstance(node, Var):
        return True
    return any(_has_var(getattr(node, name)) for name in ("arg", "left", "right") if hasattr(node, name))


def parse_field(src, n: int) -> FieldExpr:
    """Parse an expression string (a bare number is accepted too)."""
    if isinstance(src, (int, float)):
        src = repr(float(src))
    if not str(src).strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return FieldExpr(str(src), n, _Parser(str(src), n).parse())


def check_periodic(fe: FieldExpr, grid, tol: float) -> bool:
    """Sampled check that ``fe(x + e_k) == fe(x)`` for every node and unit shift.

    Drift below ``tol`` over a unit shift is invisible to this check.
    """
    pts = grid.points()
    base = fe.at_points(pts)
    for k in range(fe.n):
        shifted = pts.copy()
        shifted[:, k] += 1.0
        if np.max(np.abs(fe.at_points(shifted) - base)) > tol:
            return False
    return True
