"""
Small arithmetic expression language for weights, coefficients and kernels.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.  Names are variables
(``m``, ``xi``, ``x``, ...) or the constants ``pi``, ``inf`` and the imaginary
unit ``I``.  Functions:
``exp abs sqrt pow min max``.  Evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError, ExprSyntaxError

CONSTANTS = {"pi": np.pi, "inf": np.inf, "I": 1j}
FUNCTIONS = {"exp": (1, 1), "abs": (1, 1), "sqrt": (1, 1), "pow": (2, 2), "min": (2, None), "max": (2, None)}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind) + 1
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            return Unary(tok[1], self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, val, col = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", col)
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                lo, hi = FUNCTIONS[val]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise ExprSyntaxError(f"{val}() takes {lo}{'' if hi == lo else '+'} arguments", col)
                return Call(val, tuple(args))
            return Var(val)
        if val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"expected a number, name or '(' but found {what}", col)


def _power(a, b):
    a = np.asarray(a, dtype=float) if not np.iscomplexobj(a) else np.asarray(a)
    b = np.asarray(b)
    if np.any((a == 0) & (b < 0)):
        raise DomainError("0 raised to a negative power")
    if not np.iscomplexobj(a) and np.any((a < 0) & (b != np.round(b))):
        raise DomainError("negative base with a non-integer exponent")
    return a**b


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in env:
            return env[node.name]
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        raise DomainError(f"unbound variable {node.name!r}")
    if isinstance(node, Unary):
        v = _eval(node.operand, env)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return a / b
        return _power(a, b)
    args = [_eval(a, env) for a in node.args]
    f = node.func
    if f == "exp":
        return np.exp(args[0])
    if f == "abs":
        return np.abs(args[0])
    if f == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise DomainError("sqrt of a negative number")
        return np.sqrt(args[0])
    if f == "pow":
        return _power(args[0], args[1])
    red = np.minimum if f == "min" else np.maximum
    out = args[0]
    for a in args[1:]:
        out = red(out, a)
    return out


def _to_str(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{_to_str(node.operand)})"
    if isinstance(node, Binary):
        return f"({_to_str(node.left)} {node.op} {_to_str(node.right)})"
    return f"{node.func}({', '.join(_to_str(a) for a in node.args)})"


def _names(node, acc):
    if isinstance(node, Var):
        if node.name not in CONSTANTS:
            acc.add(node.name)
    elif isinstance(node, Unary):
        _names(node.operand, acc)
    elif isinstance(node, Binary):
        _names(node.left, acc)
        _names(node.right, acc)
    elif isinstance(node, Call):
        for a in node.args:
            _names(a, acc)
    return acc


@dataclass(frozen=True)
class Expr:
    """Parsed expression; ``source`` is the original text."""

    root: object
    source: str

    @property
    def variables(self) -> frozenset:
        return frozenset(_names(self.root, set()))

    def evaluate(self, bindings: Mapping | None = None, **kw):
        env = dict(bindings or {}, **kw)
        with np.errstate(over="ignore"):
            return _eval(self.root, env)

    __call__ = evaluate

    def __str__(self):
        return _to_str(self.root)

    def to_sympy(self, symbols: Mapping):
        """Convert to a sympy expression; ``symbols`` maps names to sympy objects."""
        import sympy as sp

        def conv(node):
            if isinstance(node, Num):
                v = node.value
                return sp.Integer(int(v)) if v == int(v) and abs(v) < 1e15 else sp.Float(v)
            if isinstance(node, Var):
                if node.name in symbols:
                    return symbols[node.name]
                if node.name == "pi":
                    return sp.pi
                if node.name == "inf":
                    return sp.oo
                if node.name == "I":
                    return sp.I
                raise DomainError(f"unbound variable {node.name!r}")
            if isinstance(node, Unary):
                v = conv(node.operand)
                return -v if node.op == "-" else v
            if isinstance(node, Binary):
                a, b = conv(node.left), conv(node.right)
                return {"+": a + b, "-": a - b, "*": a * b}.get(node.op) if node.op in "+-*" else (
                    a / b if node.op == "/" else a**b
                )
            args = [conv(a) for a in node.args]
            table = {"exp": sp.exp, "abs": sp.Abs, "sqrt": sp.sqrt, "pow": sp.Pow,
                     "min": sp.Min, "max": sp.Max}
            return table[node.func](*args)

        return conv(self.root)


def parse_expr(text: str) -> Expr:
    """Parse ``text``; syntax errors carry a 1-based column."""
    if not isinstance(text, str):
        text = str(text)
    return Expr(_Parser(text).parse(), text)
