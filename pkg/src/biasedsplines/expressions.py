"""A small arithmetic expression language for metric and cometric entries.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Identifiers are resolved at evaluation time from a bindings mapping; the
callable names are ``sin cos tan exp sqrt``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ExpressionDomainError, ExpressionSyntaxError, UnboundIdentifierError
from .hyperdual import HyperDual

FUNCTIONS = ("sin", "cos", "tan", "exp", "sqrt")

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Num:
    value: float
    offset: int


@dataclass(frozen=True)
class Var:
    name: str
    offset: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    offset: int


Node = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[start]!r}", _byte_offset(text, start))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", len(text.encode("utf-8"))))
    return tokens


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", offset)

    def parse(self):
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {text!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, offset = self.take()
            node = BinOp(op, node, self.term(), offset)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, offset = self.take()
            node = BinOp(op, node, self.factor(), offset)
        return node

    def factor(self):
        kind, text, offset = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.factor(), offset)
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, offset = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return BinOp("^", base, self.factor(), offset)
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "number":
            return Num(float(text), offset)
        if kind == "ident":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {text!r}", offset)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg, offset)
            return Var(text, offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"expected a number, identifier or '(', found {found}", offset)


def _identifiers(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _identifiers(node.operand, out)
    elif isinstance(node, BinOp):
        _identifiers(node.left, out)
        _identifiers(node.right, out)
    elif isinstance(node, Call):
        _identifiers(node.arg, out)
    return out


@dataclass(frozen=True)
class Expression:
    text: str
    root: Node

    @property
    def identifiers(self):
        return frozenset(_identifiers(self.root, set()))

    def evaluate(self, bindings: Mapping[str, object]):
        """Plain evaluation; bindings may be floats or broadcastable arrays."""
        return _value(_eval(self.root, bindings))

    def __call__(self, **bindings):
        return self.evaluate(bindings)


def parse_expression(text: str) -> Expression:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return Expression(text, _Parser(text).parse())


def _value(x):
    return x.a if isinstance(x, HyperDual) else x


def _check(ok, message, offset):
    if not np.all(ok):
        raise ExpressionDomainError(message, offset)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundIdentifierError(node.name, node.offset) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        x = _eval(node.arg, env)
        return _call(node.func, x, node.offset)
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    op = node.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        _check(np.asarray(_value(right)) != 0, "division by zero", node.offset)
        if isinstance(right, HyperDual) or isinstance(left, HyperDual):
            return HyperDual.lift(left) / right
        return np.true_divide(left, right)
    return _power(left, right, node.offset)


def _power(base, exponent, offset):
    a = np.asarray(_value(base), dtype=float)
    if isinstance(exponent, HyperDual) and not exponent.is_real():
        _check(a > 0, "power with variable exponent needs a positive base", offset)
        return (HyperDual.lift(base).log() * exponent).exp()
    y = np.asarray(_value(exponent), dtype=float)
    integral = y == np.round(y)
    _check((a >= 0) | integral, "negative base with non-integer exponent", offset)
    _check((a != 0) | (y >= 0), "zero raised to a negative power", offset)
    if isinstance(base, HyperDual):
        return base.power(y)
    with np.errstate(all="ignore"):
        return np.power(a, y) if a.ndim or y.ndim else float(a ** y)


def _call(func, x, offset):
    a = np.asarray(_value(x), dtype=float)
    hd = isinstance(x, HyperDual)
    if func == "sqrt":
        _check(a >= 0, "sqrt of a negative number", offset)
        if hd:
            _check(a > 0, "sqrt is not differentiable at 0", offset)
            return x.sqrt()
        return np.sqrt(x)
    if func == "tan":
        _check(np.abs(np.cos(a)) > 1e-15, "tan evaluated at a pole", offset)
        return x.tan() if hd else np.tan(x)
    if func == "exp":
        with np.errstate(over="ignore"):
            out = x.exp() if hd else np.exp(x)
        _check(np.isfinite(_value(out)), "exp overflow", offset)
        return out
    if func == "sin":
        return x.sin() if hd else np.sin(x)
    return x.cos() if hd else np.cos(x)


def eval_with_partials(expr: Expression, bindings: Mapping[str, object], wrt: Sequence[str] | None = None):
    """Value, gradient and Hessian of ``expr`` with respect to the names in ``wrt``.

    ``wrt`` defaults to every bound name, in mapping order. Each entry of the
    Hessian comes from one hyper-dual pass, so the results are exact up to
    floating-point roundoff.
    """
    names = list(bindings) if wrt is None else list(wrt)
    n = len(names)
    for name in names:
        if name not in bindings:
            raise UnboundIdentifierError(name, 0)
    used = expr.identifiers
    base = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    shape = np.broadcast_shapes(*(v.shape for v in base.values())) if base else ()
    value = np.broadcast_to(np.asarray(expr.evaluate(base), dtype=float), shape).copy()
    grad = np.zeros(shape + (n,))
    hess = np.zeros(shape + (n, n))
    active = [i for i, name in enumerate(names) if name in used]
    for ii, i in enumerate(active):
        for j in active[ii:]:
            env = dict(base)
            if i == j:
                env[names[i]] = HyperDual(base[names[i]], 1.0, 1.0, 0.0)
            else:
                env[names[i]] = HyperDual(base[names[i]], 1.0, 0.0, 0.0)
                env[names[j]] = HyperDual(base[names[j]], 0.0, 1.0, 0.0)
            out = HyperDual.lift(_eval(expr.root, env))
            if i == j:
                grad[..., i] = out.b
            hess[..., i, j] = out.d
            hess[..., j, i] = out.d
    return value, grad, hess
