"""Recursive-descent parser for symbol text.

Grammar::

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' exponent)?
    atom  := number | ident | fn '(' expr ')' | '(' expr ')'

``exponent`` is an optionally signed integer literal or a parenthesised
constant expression that evaluates to an integer.  ``h0`` expands to the
harmonic oscillator symbol and ``pi`` to the constant.  Parsing never folds
or simplifies, which keeps print/parse round trips structural.
"""
from __future__ import annotations

import math
import re

from .nodes import FUNCTIONS, VARIABLES, Add, Const, Div, Func, Mul, Neg, Node, Pow, Sub, Var


class SymbolSyntaxError(ValueError):
    """Malformed symbol text.  ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.reason = message
        self.text = text
        super().__init__(f"{message} (at byte offset {offset})")


_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def oscillator_tree() -> Node:
    """(x1^2 + x2^2 + xi1^2 + xi2^2)/2 built without folding."""
    squares = [Pow(Var(name), 2) for name in ("x1", "x2", "xi1", "xi2")]
    total = squares[0]
    for sq in squares[1:]:
        total = Add(total, sq)
    return Div(total, Const(2.0))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        self._byte_offsets = self._make_offsets(text)
        self._tokenize()
        self.pos = 0

    @staticmethod
    def _make_offsets(text: str) -> list[int]:
        offsets, acc = [], 0
        for ch in text:
            offsets.append(acc)
            acc += len(ch.encode("utf-8"))
        offsets.append(acc)
        return offsets

    def _byte(self, char_index: int) -> int:
        return self._byte_offsets[min(char_index, len(self._byte_offsets) - 1)]

    def _tokenize(self):
        i, text = 0, self.text
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                raise SymbolSyntaxError(f"unexpected character {text[i]!r}", self._byte(i), text)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            i = m.end()
        self.tokens.append(("end", "", len(text)))

    # -- token helpers ------------------------------------------------------
    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, start = self.advance()
        if kind != "op" or value != op:
            shown = value or "end of input"
            raise SymbolSyntaxError(f"expected {op!r}, found {shown!r}", self._byte(start), self.text)

    def fail(self, message: str, tok) -> SymbolSyntaxError:
        return SymbolSyntaxError(message, self._byte(tok[2]), self.text)

    # -- grammar ------------------------------------------------------------
    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.fail(f"unexpected token {tok[1]!r}", tok)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        tok = self.peek()
        sign = 1
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            sign = -1
            tok = self.peek()
        if tok[0] == "number":
            self.advance()
            value = float(tok[1])
            if value != int(value) or not re.fullmatch(r"\d+", tok[1]):
                raise self.fail("non-integer exponent", tok)
            return sign * int(value)
        if tok[0] == "op" and tok[1] == "(":
            inner = self.atom()
            try:
                value = _constant_value(inner)
            except ValueError:
                raise self.fail("non-integer exponent", tok) from None
            if not math.isfinite(value) or value != int(value):
                raise self.fail("non-integer exponent", tok)
            return sign * int(value)
        raise self.fail("non-integer exponent", tok)

    def atom(self) -> Node:
        tok = self.advance()
        kind, value, _ = tok
        if kind == "number":
            return Const(float(value))
        if kind == "ident":
            if value in FUNCTIONS:
                nxt = self.peek()
                if not (nxt[0] == "op" and nxt[1] == "("):
                    raise self.fail(f"function {value!r} needs an argument in parentheses", nxt)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Func(value, arg)
            if value in VARIABLES:
                return Var(value)
            if value == "pi":
                return Const(math.pi)
            if value == "h0":
                return oscillator_tree()
            raise self.fail(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        shown = value or "end of input"
        raise self.fail(f"unexpected token {shown!r}", tok)


def _constant_value(node: Node) -> float:
    from .evaluate import eval_node

    if any(True for _ in _iter_vars(node)):
        raise ValueError("not constant")
    return float(eval_node(node, {}))


def _iter_vars(node: Node):
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            yield n
        stack.extend(n.children())


def parse_tree(text: str) -> Node:
    if not isinstance(text, str):
        raise TypeError("symbol text must be a string")
    if not text.strip():
        raise SymbolSyntaxError("empty expression", 0, text)
    return _Parser(text).parse()
