"""Strict pointwise evaluation with domain checking."""
from __future__ import annotations

import math

from .nodes import Add, Const, Div, Func, Mul, Neg, Node, Pow, Sub, Var


class SymbolDomainError(ArithmeticError):
    """Evaluation left the domain of the expression.  ``node`` is the culprit."""

    def __init__(self, message: str, node: Node):
        from .printer import to_text

        self.node = node
        try:
            shown = to_text(node)
        except ValueError:
            shown = type(node).__name__
        super().__init__(f"{message} in subexpression `{shown}`")


def _apply_func(node: Func, value: float) -> float:
    name = node.name
    if name == "log":
        if value <= 0.0:
            raise SymbolDomainError("log of a non-positive value", node)
        return math.log(value)
    if name == "sqrt":
        if value < 0.0:
            raise SymbolDomainError("sqrt of a negative value", node)
        return math.sqrt(value)
    if name == "exp":
        try:
            return math.exp(value)
        except OverflowError:
            raise SymbolDomainError("exp overflow", node) from None
    if name == "sin":
        return math.sin(value)
    if name == "cos":
        return math.cos(value)
    return -value


def eval_node(node: Node, env: dict[str, float]) -> float:
    """Evaluate ``node`` at the scalar assignment ``env``.

    Shared subtrees are evaluated once.  Division by zero, logs of
    non-positive numbers and similar raise :class:`SymbolDomainError`.
    """
    cache: dict[int, float] = {}

    def ev(n: Node) -> float:
        key = id(n)
        if key in cache:
            return cache[key]
        if isinstance(n, Const):
            out = n.value
        elif isinstance(n, Var):
            if n.name not in env:
                raise SymbolDomainError(f"variable {n.name} has no value", n)
            out = float(env[n.name])
        elif isinstance(n, Neg):
            out = -ev(n.arg)
        elif isinstance(n, Add):
            out = ev(n.left) + ev(n.right)
        elif isinstance(n, Sub):
            out = ev(n.left) - ev(n.right)
        elif isinstance(n, Mul):
            out = ev(n.left) * ev(n.right)
        elif isinstance(n, Div):
            den = ev(n.right)
            if den == 0.0:
                raise SymbolDomainError("division by zero", n)
            out = ev(n.left) / den
        elif isinstance(n, Pow):
            base = ev(n.base)
            if base == 0.0 and n.exponent < 0:
                raise SymbolDomainError("zero raised to a negative power", n)
            try:
                out = base**n.exponent
            except OverflowError:
                raise SymbolDomainError("power overflow", n) from None
        elif isinstance(n, Func):
            out = _apply_func(n, ev(n.arg))
        else:
            raise TypeError(f"unknown node {type(n).__name__}")
        if not math.isfinite(out):
            raise SymbolDomainError("non-finite intermediate value", n)
        cache[key] = out
        return out

    return ev(node)
