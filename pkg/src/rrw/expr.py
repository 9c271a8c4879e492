"""Arithmetic expressions in the single variable x.

Grammar (EBNF):

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , [ "-" ] , INTEGER ] ;
    atom    = NUMBER | "x" | NAME , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    NAME    = "min" | "max" | "abs" ;

Evaluation is numpy-vectorised: ``evaluate(tree, x)`` accepts scalars or
arrays.  ``derivative`` differentiates the tree symbolically; min/max/abs
are handled piecewise (almost-everywhere correct, one-sided at kinks).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionSyntaxError

__all__ = [
    "Node", "Num", "Var", "BinOp", "Neg", "Pow", "Call", "Select",
    "parse_expression", "evaluate", "derivative", "to_source",
    "is_polynomial", "compile_program",
]


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * /
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Call(Node):
    name: str  # min, max, abs
    args: tuple


@dataclass(frozen=True)
class Select(Node):
    """Internal node: evaluates ``lo`` where u <= v, else ``hi``.

    Produced by differentiation of min/max/abs; never emitted by the parser
    and never printed.
    """

    u: Node
    v: Node
    lo: Node
    hi: Node


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_CALLABLES = {"min": 2, "max": 2, "abs": 1}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise ExpressionSyntaxError(f"unexpected character {stripped[0]!r}", bad_at)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExpressionSyntaxError(f"expected {op!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected trailing input {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = BinOp(val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            sign = 1
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                self.next()
                sign = -1
            kind, val, pos = self.next()
            if kind != "num" or val != int(val):
                raise ExpressionSyntaxError("exponent must be an integer literal", pos)
            node = Pow(node, sign * int(val))
        return node

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Num(val)
        if kind == "name":
            if val == "x":
                return Var()
            if val in _CALLABLES:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k, v, p = self.peek()
                    if k == "op" and v == ",":
                        self.next()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                if len(args) != _CALLABLES[val]:
                    raise ExpressionSyntaxError(
                        f"{val} takes {_CALLABLES[val]} argument(s), got {len(args)}", pos)
                return Call(val, tuple(args))
            raise ExpressionSyntaxError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError("expected a number, 'x', a function call or '('", pos)


def parse_expression(text):
    return _Parser(text).parse()


def evaluate(node, x):
    """Evaluate ``node`` at x (scalar or ndarray). Division by zero yields inf/nan."""
    if isinstance(node, Num):
        return np.full_like(x, node.value, dtype=float) if isinstance(x, np.ndarray) else node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -evaluate(node.arg, x)
    if isinstance(node, BinOp):
        a = evaluate(node.left, x)
        b = evaluate(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b
    if isinstance(node, Pow):
        base = evaluate(node.base, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return base ** node.exponent
    if isinstance(node, Call):
        args = [evaluate(a, x) for a in node.args]
        if node.name == "min":
            return np.minimum(args[0], args[1])
        if node.name == "max":
            return np.maximum(args[0], args[1])
        return np.abs(args[0])
    if isinstance(node, Select):
        u = evaluate(node.u, x)
        v = evaluate(node.v, x)
        lo = evaluate(node.lo, x)
        hi = evaluate(node.hi, x)
        return np.where(u <= v, lo, hi) if isinstance(x, np.ndarray) else (lo if u <= v else hi)
    raise TypeError(f"unknown node {node!r}")


def derivative(node):
    """Symbolic derivative; piecewise (a.e.) for min/max/abs."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Neg):
        return Neg(derivative(node.arg))
    if isinstance(node, BinOp):
        da, db = derivative(node.left), derivative(node.right)
        if node.op in "+-":
            return BinOp(node.op, da, db)
        if node.op == "*":
            return BinOp("+", BinOp("*", da, node.right), BinOp("*", node.left, db))
        # quotient rule
        num = BinOp("-", BinOp("*", da, node.right), BinOp("*", node.left, db))
        return BinOp("/", num, Pow(node.right, 2))
    if isinstance(node, Pow):
        k = node.exponent
        if k == 0:
            return Num(0.0)
        return BinOp("*", BinOp("*", Num(float(k)), Pow(node.base, k - 1)), derivative(node.base))
    if isinstance(node, Call):
        if node.name == "min":
            a, b = node.args
            return Select(a, b, derivative(a), derivative(b))
        if node.name == "max":
            a, b = node.args
            return Select(a, b, derivative(b), derivative(a))
        a = node.args[0]
        return Select(a, Num(0.0), Neg(derivative(a)), derivative(a))
    if isinstance(node, Select):
        return Select(node.u, node.v, derivative(node.lo), derivative(node.hi))
    raise TypeError(f"unknown node {node!r}")


def is_polynomial(node):
    """True when the tree is a polynomial in x (division only by constants)."""
    if isinstance(node, (Num, Var)):
        return True
    if isinstance(node, Neg):
        return is_polynomial(node.arg)
    if isinstance(node, BinOp):
        if node.op == "/":
            return is_polynomial(node.left) and _is_constant(node.right)
        return is_polynomial(node.left) and is_polynomial(node.right)
    if isinstance(node, Pow):
        return node.exponent >= 0 and is_polynomial(node.base)
    return False


def _is_constant(node):
    if isinstance(node, Num):
        return True
    if isinstance(node, Neg):
        return _is_constant(node.arg)
    if isinstance(node, BinOp):
        return _is_constant(node.left) and _is_constant(node.right)
    if isinstance(node, Pow):
        return _is_constant(node.base)
    if isinstance(node, Call):
        return all(_is_constant(a) for a in node.args)
    return False


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(node):
    """Render the tree back to parseable text; parse(to_source(t)) == t."""
    return _render(node, 0)


def _render(node, parent_prec):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        inner = _render(node.arg, 3)
        text = f"-{inner}"
        return f"({text})" if parent_prec > 2 else text
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = _render(node.left, prec)
        # parse is left-associative and floats are not, so the right operand
        # keeps its parentheses even at equal precedence
        right = _render(node.right, prec + 1)
        text = f"{left} {node.op} {right}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, Pow):
        base = _render(node.base, 5)
        text = f"{base}^{node.exponent}" if node.exponent >= 0 else f"{base}^-{-node.exponent}"
        return f"({text})" if parent_prec > 4 else text
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_render(a, 0) for a in node.args)})"
    raise TypeError(f"cannot render {node!r}")


# --- opcode programs for the numba stack machine -------------------------

OP_CONST = 0
OP_X = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7
OP_MIN = 8
OP_MAX = 9
OP_ABS = 10

_MAX_STACK = 64


def compile_program(node):
    """Flatten the tree into postfix (codes, args) arrays for the jit VM."""
    codes, args = [], []

    def emit(n):
        if isinstance(n, Num):
            codes.append(OP_CONST)
            args.append(n.value)
        elif isinstance(n, Var):
            codes.append(OP_X)
            args.append(0.0)
        elif isinstance(n, Neg):
            emit(n.arg)
            codes.append(OP_NEG)
            args.append(0.0)
        elif isinstance(n, BinOp):
            emit(n.left)
            emit(n.right)
            codes.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[n.op])
            args.append(0.0)
        elif isinstance(n, Pow):
            emit(n.base)
            codes.append(OP_POW)
            args.append(float(n.exponent))
        elif isinstance(n, Call):
            for a in n.args:
                emit(a)
            codes.append({"min": OP_MIN, "max": OP_MAX, "abs": OP_ABS}[n.name])
            args.append(0.0)
        else:
            raise TypeError(f"cannot compile {n!r}")

    emit(node)
    if _stack_depth(node) > _MAX_STACK:
        raise ExpressionSyntaxError("expression too deeply nested")
    return np.asarray(codes, dtype=np.int64), np.asarray(args, dtype=np.float64)


def _stack_depth(node):
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, (Neg, Pow)):
        return _stack_depth(node.arg if isinstance(node, Neg) else node.base)
    if isinstance(node, BinOp):
        return max(_stack_depth(node.left), 1 + _stack_depth(node.right))
    if isinstance(node, Call):
        return max(_stack_depth(a) + i for i, a in enumerate(node.args))
    raise TypeError(f"cannot compile {node!r}")
