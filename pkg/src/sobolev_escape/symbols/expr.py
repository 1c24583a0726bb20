"""User-facing symbol type and the calculus built on expression trees."""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import nodes as N
from .compile import CompiledBundle
from .evaluate import eval_node
from .nodes import SPACE_VARS, VARIABLES, Node
from .parser import oscillator_tree, parse_tree
from .printer import to_text


@dataclass(frozen=True)
class PhasePoint:
    """A point (x1, x2, xi1, xi2) of R^4."""

    x1: float
    x2: float
    xi1: float
    xi2: float

    @classmethod
    def of(cls, p) -> "PhasePoint":
        if isinstance(p, PhasePoint):
            return p
        a = np.asarray(p, dtype=float).reshape(4)
        return cls(*(float(v) for v in a))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.xi1, self.xi2])

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    @property
    def h0(self) -> float:
        return 0.5 * self.rho**2

    def __iter__(self):
        return iter((self.x1, self.x2, self.xi1, self.xi2))


class SymbolExpr:
    """A phase-space symbol given by an expression tree.

    ``homogeneity`` is ``None``, ``("positive", m)`` or ``("definite", m)``;
    it is a declaration that :meth:`check_homogeneity` can test.  Calling the
    object evaluates it on an array of points with trailing dimension 4.
    """

    __slots__ = ("root", "declared_order", "homogeneity", "_bundle")

    def __init__(self, root: Node, declared_order: float = 0.0, homogeneity=None):
        self.root = N.as_node(root)
        self.declared_order = float(declared_order)
        if homogeneity is not None:
            kind, degree = homogeneity
            if kind not in ("positive", "definite"):
                raise ValueError("homogeneity kind must be 'positive' or 'definite'")
            homogeneity = (kind, float(degree))
        self.homogeneity = homogeneity
        self._bundle = None

    # -- construction ------------------------------------------------------
    @classmethod
    def parse(cls, text: str, declared_order: float = 0.0, homogeneity=None) -> "SymbolExpr":
        return cls(parse_tree(text), declared_order, homogeneity)

    @classmethod
    def var(cls, name: str) -> "SymbolExpr":
        return cls(N.Var(name))

    @classmethod
    def const(cls, value: float) -> "SymbolExpr":
        return cls(N.Const(value), 0.0, ("positive", 0.0))

    def with_meta(self, declared_order=None, homogeneity="keep") -> "SymbolExpr":
        return SymbolExpr(
            self.root,
            self.declared_order if declared_order is None else declared_order,
            self.homogeneity if homogeneity == "keep" else homogeneity,
        )

    # -- inspection ---------------------------------------------------------
    def text(self) -> str:
        return to_text(self.root)

    def __repr__(self) -> str:
        return f"SymbolExpr({self.text()!r})"

    def __str__(self) -> str:
        return self.text()

    def variables(self) -> set[str]:
        return N.variables_in(self.root)

    @property
    def time_dependent(self) -> bool:
        return "t" in self.variables()

    def structurally_equal(self, other: "SymbolExpr") -> bool:
        return self.root == N.as_node(other)

    # -- evaluation -----------------------------------------------------------
    def at(self, p, t: float = 0.0) -> float:
        """Strict evaluation at one point; raises SymbolDomainError."""
        q = PhasePoint.of(p)
        env = {"x1": q.x1, "x2": q.x2, "xi1": q.xi1, "xi2": q.xi2, "t": float(t)}
        return eval_node(self.root, env)

    def __call__(self, points, t=0.0) -> np.ndarray:
        if self._bundle is None:
            self._bundle = CompiledBundle([self.root])
        return self._bundle(points, t)[..., 0]

    # -- arithmetic sugar -----------------------------------------------------
    def _combine(self, other, op) -> "SymbolExpr":
        return SymbolExpr(op(self.root, N.as_node(other)))

    def __add__(self, o):
        return self._combine(o, N.add)

    def __radd__(self, o):
        return SymbolExpr(N.add(N.as_node(o), self.root))

    def __sub__(self, o):
        return self._combine(o, N.sub)

    def __rsub__(self, o):
        return SymbolExpr(N.sub(N.as_node(o), self.root))

    def __mul__(self, o):
        return self._combine(o, N.mul)

    def __rmul__(self, o):
        return SymbolExpr(N.mul(N.as_node(o), self.root))

    def __truediv__(self, o):
        return self._combine(o, N.div)

    def __rtruediv__(self, o):
        return SymbolExpr(N.div(N.as_node(o), self.root))

    def __neg__(self):
        return SymbolExpr(N.neg(self.root), self.declared_order, self.homogeneity)

    def __pow__(self, n: int):
        return SymbolExpr(self.root**n)

    # -- homogeneity test -----------------------------------------------------
    def check_homogeneity(self, n_points: int = 50, seed: int = 0, tol: float = 1e-9) -> bool:
        """Randomised test of the declared homogeneity (True if none declared)."""
        if self.homogeneity is None:
            return True
        kind, m = self.homogeneity
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(n_points, 4))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        lam = rng.uniform(0.5, 10.0, size=n_points)
        if kind == "definite":
            z *= rng.uniform(1.0, 3.0, size=(n_points, 1))
            lam = rng.uniform(1.0, 10.0, size=n_points)
        t = rng.uniform(0, 2 * math.pi, size=n_points)
        base = self(z, t)
        scaled = self(z * lam[:, None], t)
        return bool(np.all(np.abs(scaled - lam**m * base) <= tol * (1 + np.abs(lam**m * base))))


def as_symbol(f) -> SymbolExpr:
    if isinstance(f, SymbolExpr):
        return f
    if isinstance(f, str):
        return SymbolExpr.parse(f)
    return SymbolExpr(N.as_node(f))


def parse_symbol(text: str) -> SymbolExpr:
    """Parse symbol text; see :mod:`.parser` for the grammar."""
    return SymbolExpr.parse(text)


def eval_symbol(f, p, t: float = 0.0) -> float:
    return as_symbol(f).at(p, t)


# ---------------------------------------------------------------------------
# Differentiation


@functools.lru_cache(maxsize=8192)
def _diff_node(node: Node, var: str) -> Node:
    memo: dict[Node, Node] = {}

    def d(n: Node) -> Node:
        if n in memo:
            return memo[n]
        if isinstance(n, N.Const):
            out = N.ZERO
        elif isinstance(n, N.Var):
            out = N.ONE if n.name == var else N.ZERO
        elif var not in N.variables_in(n):
            out = N.ZERO
        elif isinstance(n, N.Neg):
            out = N.neg(d(n.arg))
        elif isinstance(n, N.Add):
            out = N.add(d(n.left), d(n.right))
        elif isinstance(n, N.Sub):
            out = N.sub(d(n.left), d(n.right))
        elif isinstance(n, N.Mul):
            out = N.add(N.mul(d(n.left), n.right), N.mul(n.left, d(n.right)))
        elif isinstance(n, N.Div):
            num = N.sub(N.mul(d(n.left), n.right), N.mul(n.left, d(n.right)))
            out = N.div(num, N.power(n.right, 2))
        elif isinstance(n, N.Pow):
            k = n.exponent
            out = N.mul(N.mul(N.Const(k), N.power(n.base, k - 1)), d(n.base))
        elif isinstance(n, N.Func):
            du = d(n.arg)
            u = n.arg
            if n.name == "sin":
                out = N.mul(N.func("cos", u), du)
            elif n.name == "cos":
                out = N.neg(N.mul(N.func("sin", u), du))
            elif n.name == "exp":
                out = N.mul(n, du)
            elif n.name == "log":
                out = N.div(du, u)
            elif n.name == "sqrt":
                out = N.div(du, N.mul(N.Const(2.0), n))
            else:  # neg
                out = N.neg(du)
        else:
            raise TypeError(type(n).__name__)
        memo[n] = out
        return out

    return d(node)


def differentiate(f, var: str) -> SymbolExpr:
    """Exact derivative of ``f`` with respect to one of x1, x2, xi1, xi2, t."""
    if var not in VARIABLES:
        raise ValueError(f"cannot differentiate with respect to {var!r}")
    f = as_symbol(f)
    hom = None
    order = f.declared_order
    if var in SPACE_VARS:
        order -= 1.0
        if f.homogeneity is not None:
            hom = (f.homogeneity[0], f.homogeneity[1] - 1.0)
    else:
        hom = f.homogeneity
    return SymbolExpr(_diff_node(f.root, var), order, hom)


def gradient(f) -> list[SymbolExpr]:
    return [differentiate(f, v) for v in SPACE_VARS]


def poisson_bracket(h, f) -> SymbolExpr:
    """{h, f} = grad_xi h . grad_x f - grad_x h . grad_xi f."""
    h, f = as_symbol(h), as_symbol(f)
    total = N.ZERO
    for x, xi in (("x1", "xi1"), ("x2", "xi2")):
        total = N.add(total, N.mul(_diff_node(h.root, xi), _diff_node(f.root, x)))
        total = N.sub(total, N.mul(_diff_node(h.root, x), _diff_node(f.root, xi)))
    hom = None
    if h.homogeneity and f.homogeneity:
        kind = "positive" if h.homogeneity[0] == f.homogeneity[0] == "positive" else "definite"
        hom = (kind, h.homogeneity[1] + f.homogeneity[1] - 2.0)
    return SymbolExpr(total, h.declared_order + f.declared_order - 2.0, hom)


# ---------------------------------------------------------------------------
# Harmonic oscillator flow


def ho_flow(p, t):
    """Exact flow of h0: (x cos t + xi sin t, -x sin t + xi cos t).

    Accepts a PhasePoint (returns a PhasePoint) or an array with trailing
    dimension 4 (returns an array); ``t`` may broadcast against the points.
    """
    scalar = isinstance(p, PhasePoint)
    z = p.as_array() if scalar else np.asarray(p, dtype=float)
    c, s = np.cos(t), np.sin(t)
    c = np.asarray(c)[..., None] if np.ndim(t) else c
    s = np.asarray(s)[..., None] if np.ndim(t) else s
    x, xi = z[..., :2], z[..., 2:]
    out = np.concatenate([x * c + xi * s, -x * s + xi * c], axis=-1)
    return PhasePoint.of(out) if scalar else out


def substitute(f, mapping: dict[str, Node | SymbolExpr | float]) -> SymbolExpr:
    """Simultaneous substitution of variables by trees."""
    f = as_symbol(f)
    repl = {k: N.as_node(v) for k, v in mapping.items()}
    memo: dict[Node, Node] = {}

    def sub(n: Node) -> Node:
        if n in memo:
            return memo[n]
        if isinstance(n, N.Var):
            out = repl.get(n.name, n)
        elif isinstance(n, N.Const):
            out = n
        elif isinstance(n, N.Neg):
            out = N.neg(sub(n.arg))
        elif isinstance(n, N.Binary):
            builder = {N.Add: N.add, N.Sub: N.sub, N.Mul: N.mul, N.Div: N.div}[type(n)]
            out = builder(sub(n.left), sub(n.right))
        elif isinstance(n, N.Pow):
            out = N.power(sub(n.base), n.exponent)
        else:
            out = N.func(n.name, sub(n.arg))
        memo[n] = out
        return out

    return SymbolExpr(sub(f.root), f.declared_order, f.homogeneity)


def compose_with_flow(f, direction: int = 1) -> SymbolExpr:
    """f(t, phi^{direction * t}(z)) as a tree depending on t."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    t = N.Var("t")
    c, s = N.func("cos", t), N.func("sin", t)
    if direction < 0:
        s = N.neg(s)
    mapping = {}
    for x, xi in (("x1", "xi1"), ("x2", "xi2")):
        X, XI = N.Var(x), N.Var(xi)
        mapping[x] = N.add(N.mul(X, c), N.mul(XI, s))
        mapping[xi] = N.sub(N.mul(XI, c), N.mul(X, s))
    return substitute(f, mapping)


def h0_symbol() -> SymbolExpr:
    return SymbolExpr(oscillator_tree(), 2.0, ("positive", 2.0))


def homogenize(v0) -> SymbolExpr:
    """Replace each variable by its rho-normalised version.

    The result is positively homogeneous of degree 0 on R^4 minus the origin
    and undefined at the origin.
    """
    v0 = as_symbol(v0)
    rho = N.func(
        "sqrt",
        N.add(
            N.add(N.power(N.Var("x1"), 2), N.power(N.Var("x2"), 2)),
            N.add(N.power(N.Var("xi1"), 2), N.power(N.Var("xi2"), 2)),
        ),
    )
    mapping = {v: N.div(N.Var(v), rho) for v in SPACE_VARS}
    out = substitute(v0, mapping)
    return SymbolExpr(out.root, 0.0, ("positive", 0.0))


def evaluated_equal(f, g, n_points: int = 100, seed: int = 0, tol: float = 1e-10,
                    points: np.ndarray | None = None) -> bool:
    """Probabilistic equality: agreement at random points of the unit annulus."""
    f, g = as_symbol(f), as_symbol(g)
    rng = np.random.default_rng(seed)
    if points is None:
        points = rng.normal(size=(n_points, 4))
        points *= rng.uniform(0.5, 3.0, size=(n_points, 1)) / np.linalg.norm(points, axis=1, keepdims=True)
    t = rng.uniform(0, 2 * math.pi, size=len(points))
    a, b = f(points, t), g(points, t)
    return bool(np.all(np.abs(a - b) <= tol * (1 + np.abs(a))))


def compile_many(symbols: Sequence) -> CompiledBundle:
    return CompiledBundle([N.as_node(s) for s in symbols])


def multi_indices(j: int, nvars: int = 4) -> list[tuple[int, ...]]:
    """Multi-indices of total order <= j, by order then lexicographically."""
    idx = [a for a in itertools.product(range(j + 1), repeat=nvars) if sum(a) <= j]
    return sorted(idx, key=lambda a: (sum(a), a))


def derivative_multi(f, alpha: Iterable[int]) -> SymbolExpr:
    f = as_symbol(f)
    for var, k in zip(SPACE_VARS, alpha):
        for _ in range(k):
            f = differentiate(f, var)
    return f
