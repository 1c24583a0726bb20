"""Translate expression trees into vectorised numpy functions.

Several trees are compiled together into one straight-line function so that
subexpressions shared between them (typical for gradients and Hessians) are
computed once.  Domain problems show up as inf/nan in the output; callers
that need strict checking use :func:`eval_node` instead.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .nodes import VARIABLES, Add, Const, Div, Func, Mul, Neg, Node, Pow, Sub, Var

_NP_FUNC = {
    "sin": "_np.sin",
    "cos": "_np.cos",
    "exp": "_np.exp",
    "log": "_np.log",
    "sqrt": "_np.sqrt",
    "neg": "_np.negative",
}


def _power_code(base: str, n: int) -> str:
    if n == 2:
        return f"({base}*{base})"
    if n == 3:
        return f"({base}*{base}*{base})"
    if n == -1:
        return f"(1.0/{base})"
    if n == -2:
        return f"(1.0/({base}*{base}))"
    return f"({base}**{float(n)!r})"


def generate_source(nodes: Sequence[Node], name: str = "_compiled") -> str:
    names: dict[Node, str] = {}
    lines: list[str] = []

    def emit(node: Node) -> str:
        # iterative post-order so deep trees do not hit the recursion limit
        stack: list[tuple[Node, bool]] = [(node, False)]
        while stack:
            n, ready = stack.pop()
            if n in names:
                continue
            if isinstance(n, Const):
                names[n] = repr(n.value)
                continue
            if isinstance(n, Var):
                names[n] = n.name
                continue
            if not ready:
                stack.append((n, True))
                for child in n.children():
                    if child not in names:
                        stack.append((child, False))
                continue
            if isinstance(n, Neg):
                code = f"(-{names[n.arg]})"
            elif isinstance(n, (Add, Sub, Mul, Div)):
                code = f"({names[n.left]} {n.op} {names[n.right]})"
            elif isinstance(n, Pow):
                code = _power_code(names[n.base], n.exponent)
            elif isinstance(n, Func):
                code = f"{_NP_FUNC[n.name]}({names[n.arg]})"
            else:
                raise TypeError(type(n).__name__)
            tmp = f"_t{len(lines)}"
            lines.append(f"    {tmp} = {code}")
            names[n] = tmp
        return names[node]

    outputs = [emit(n) for n in nodes]
    args = ", ".join(VARIABLES)
    body = "\n".join(lines)
    result = ", ".join(outputs) + ("," if len(outputs) == 1 else "")
    return f"def {name}({args}):\n{body}\n    return ({result})\n"


def compile_nodes(nodes: Sequence[Node]) -> Callable[..., tuple]:
    """Compile ``nodes`` into ``fn(x1, x2, xi1, xi2, t) -> tuple of arrays``.

    Every output is broadcast to the common shape of the inputs, so constant
    trees still produce full arrays.
    """
    source = generate_source(list(nodes))
    namespace: dict = {"_np": np}
    exec(compile(source, "<symbol>", "exec"), namespace)
    raw = namespace["_compiled"]

    def fn(x1, x2, xi1, xi2, t=0.0):
        args = np.broadcast_arrays(
            *(np.asarray(a, dtype=float) for a in (x1, x2, xi1, xi2, t))
        )
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = raw(*args)
        shape = args[0].shape
        return tuple(np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out)

    fn.source = source
    return fn


class CompiledBundle:
    """Several trees evaluated together on arrays of phase points.

    ``points`` is an array with trailing dimension 4 ordered (x1, x2, xi1, xi2).
    """

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = list(nodes)
        self._fn = compile_nodes(self.nodes)

    def __call__(self, points, t=0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = self._fn(pts[..., 0], pts[..., 1], pts[..., 2], pts[..., 3], t)
        return np.stack(out, axis=-1)
