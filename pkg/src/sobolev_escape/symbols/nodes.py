"""Expression nodes for phase-space symbols.

Nodes are immutable and compare structurally.  The hash is computed once at
construction so that large derivative trees can be used as dictionary keys
(common-subexpression elimination in the compiler relies on this).
"""
from __future__ import annotations

import functools
import math

SPACE_VARS = ("x1", "x2", "xi1", "xi2")
VARIABLES = SPACE_VARS + ("t",)
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "neg")


class Node:
    __slots__ = ("_hash",)

    def children(self) -> tuple:
        return ()

    def _key(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __repr__(self) -> str:
        from .printer import to_text

        return f"{type(self).__name__}<{to_text(self)}>"

    # Python operator sugar builds trees through the folding constructors.
    def __add__(self, other):
        return add(self, as_node(other))

    def __radd__(self, other):
        return add(as_node(other), self)

    def __sub__(self, other):
        return sub(self, as_node(other))

    def __rsub__(self, other):
        return sub(as_node(other), self)

    def __mul__(self, other):
        return mul(self, as_node(other))

    def __rmul__(self, other):
        return mul(as_node(other), self)

    def __truediv__(self, other):
        return div(self, as_node(other))

    def __rtruediv__(self, other):
        return div(as_node(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, bool) or not isinstance(exponent, int):
            raise TypeError("symbol powers take integer exponents only")
        return power(self, exponent)


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._hash = hash(("c", self.value))

    def _key(self):
        return (self.value,)


class Var(Node):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in VARIABLES:
            raise ValueError(f"unknown variable {name!r}")
        self.name = name
        self._hash = hash(("v", name))

    def _key(self):
        return (self.name,)


class Neg(Node):
    __slots__ = ("arg",)

    def __init__(self, arg: Node):
        self.arg = arg
        self._hash = hash(("neg", arg._hash))

    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.arg,)


class Binary(Node):
    __slots__ = ("left", "right")
    op = "?"

    def __init__(self, left: Node, right: Node):
        self.left = left
        self.right = right
        self._hash = hash((self.op, left._hash, right._hash))

    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right)


class Add(Binary):
    __slots__ = ()
    op = "+"


class Sub(Binary):
    __slots__ = ()
    op = "-"


class Mul(Binary):
    __slots__ = ()
    op = "*"


class Div(Binary):
    __slots__ = ()
    op = "/"


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Node, exponent: int):
        self.base = base
        self.exponent = int(exponent)
        self._hash = hash(("^", base._hash, self.exponent))

    def children(self):
        return (self.base,)

    def _key(self):
        return (self.base, self.exponent)


class Func(Node):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Node):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg
        self._hash = hash(("f", name, arg._hash))

    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.name, self.arg)


# ---------------------------------------------------------------------------
# Folding constructors.  They only remove neutral elements and fold constants;
# there is deliberately no algebraic simplification beyond that.

ZERO = Const(0.0)
ONE = Const(1.0)


def as_node(value) -> Node:
    if isinstance(value, Node):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(value)
    if hasattr(value, "root") and isinstance(value.root, Node):
        return value.root
    raise TypeError(f"cannot convert {type(value).__name__} to a symbol node")


def _is_const(node: Node, value: float | None = None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Node, n: int) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a) and (a.value != 0.0 or n > 0):
        return Const(a.value**n)
    return Pow(a, n)


def func(name: str, a: Node) -> Node:
    if name == "neg":
        # kept as a Func node so printed text round-trips through the parser
        return Func("neg", a)
    if _is_const(a):
        try:
            return Const(_SCALAR_FUNCS[name](a.value))
        except (ValueError, OverflowError):
            pass
    return Func(name, a)


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "neg": lambda v: -v,
}


@functools.lru_cache(maxsize=65536)
def _free_vars(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset((node.name,))
    out: frozenset = frozenset()
    for child in node.children():
        out = out | _free_vars(child)
    return out


def variables_in(node: Node) -> set[str]:
    return set(_free_vars(node))


def count_nodes(node: Node) -> int:
    """Number of distinct subtrees (shared subtrees counted once)."""
    seen: set[Node] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(n.children())
    return len(seen)
