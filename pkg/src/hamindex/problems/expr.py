"""Arithmetic expressions over ``t`` and ``x1 .. xd``.

Grammar (EBNF)::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = ("-" | "+") unary | power ;
    power  = atom [ "^" unary ] ;
    atom   = number | name | func "(" expr ")" | "(" expr ")" ;

``^`` is right-associative and binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is ``2^9``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "atan": np.arctan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class ExprError(ValueError):
    """Syntax error or unknown identifier; ``pos`` is the 0-based character offset."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


# -- AST ---------------------------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        return env[self.name]


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, env):
        return -self.arg.eval(env)


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object

    def eval(self, env):
        a, b = self.left.eval(env), self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return np.true_divide(a, b)
        return np.power(np.asarray(a, dtype=float), b)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object

    def eval(self, env):
        return FUNCTIONS[self.fn](self.arg.eval(env))


# -- parser --------------------------------------------------------------------
def _tokenize(text: str):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex) if m.lastindex else pos
        num, name, other = m.groups()
        if num is not None:
            out.append(("num", num, start))
        elif name is not None:
            out.append(("name", name, start))
        elif other is not None and not other.isspace():
            out.append(("op", other, start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, variables: frozenset):
        self.toks = _tokenize(text)
        self.k = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.k]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            raise ExprError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {v!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if v == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, v, pos = self.take()
        if kind == "num":
            return Num(float(v))
        if kind == "name":
            if v in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(v, arg)
            if v in CONSTANTS:
                return Num(CONSTANTS[v])
            if v in self.variables:
                return Var(v)
            raise ExprError(f"unknown identifier {v!r}", pos)
        if kind == "op" and v == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprError(f"unexpected {v or 'end of input'!r}", pos)


def variable_names(dim: int) -> frozenset:
    return frozenset(["t"] + [f"x{i + 1}" for i in range(dim)])


def parse_expr(text: str, dim: int = 0):
    """Parse ``text`` into an AST over ``t`` and ``x1 .. x{dim}``."""
    if not isinstance(text, str):
        raise ExprError("expression must be a string", 0)
    return _Parser(text, variable_names(dim)).parse()


def evaluate(node, t, x=None):
    """Evaluate an AST at times ``t`` (shape ``(k,)``) and states ``x`` (shape ``(k, d)``)."""
    t = np.asarray(t, dtype=float)
    env = {"t": t}
    if x is not None:
        x = np.asarray(x, dtype=float)
        for i in range(x.shape[-1]):
            env[f"x{i + 1}"] = x[..., i]
    with np.errstate(all="ignore"):
        val = node.eval(env)
    return np.broadcast_to(np.asarray(val, dtype=float), t.shape).astype(float)


def compile_expr(text_or_number, dim: int = 0):
    """Vectorised evaluator ``f(t, x)`` for a number or expression string."""
    if isinstance(text_or_number, (int, float)) and not isinstance(text_or_number, bool):
        c = float(text_or_number)
        return lambda t, x=None: np.full(np.shape(t), c)
    node = parse_expr(text_or_number, dim)
    return lambda t, x=None: evaluate(node, t, x)
