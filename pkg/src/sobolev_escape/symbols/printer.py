"""Text rendering of expression trees in the parser's grammar."""
from __future__ import annotations

import math

from .nodes import Add, Const, Div, Func, Mul, Neg, Node, Pow, Sub, Var

_PREC_SUM, _PREC_PRODUCT, _PREC_UNARY, _PREC_POWER, _PREC_ATOM = 1, 2, 3, 4, 5


def _format_number(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot print non-finite constant {value}")
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _render(node: Node) -> tuple[str, int]:
    if isinstance(node, Const):
        text = _format_number(node.value)
        return text, (_PREC_UNARY if node.value < 0 or text.startswith("-") else _PREC_ATOM)
    if isinstance(node, Var):
        return node.name, _PREC_ATOM
    if isinstance(node, Func):
        return f"{node.name}({_render(node.arg)[0]})", _PREC_ATOM
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _PREC_UNARY), _PREC_UNARY
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{_wrap(node.base, _PREC_ATOM)}^{exp}", _PREC_POWER
    if isinstance(node, (Add, Sub)):
        left = _wrap(node.left, _PREC_SUM)
        right = _wrap(node.right, _PREC_SUM + 1)
        return f"{left} {node.op} {right}", _PREC_SUM
    if isinstance(node, (Mul, Div)):
        left = _wrap(node.left, _PREC_PRODUCT)
        right = _wrap(node.right, _PREC_PRODUCT + 1)
        return f"{left}{node.op}{right}", _PREC_PRODUCT
    raise TypeError(f"unknown node type {type(node).__name__}")


def _wrap(node: Node, min_prec: int) -> str:
    text, prec = _render(node)
    return text if prec >= min_prec else f"({text})"


def to_text(node: Node) -> str:
    """Render ``node`` so that parsing the text rebuilds the same tree."""
    return _render(node)[0]
