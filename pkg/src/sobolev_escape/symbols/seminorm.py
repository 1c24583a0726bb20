"""Sampled estimates of weighted symbol seminorms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .average import AveragedSymbol
from .compile import CompiledBundle
from .expr import as_symbol, derivative_multi, multi_indices


@dataclass
class SeminormEstimate:
    j: int
    order: float
    value: float
    sample_size: int
    restricted_to_unit_exterior: bool
    weighted: bool = True
    per_index: dict = field(default_factory=dict)


def _annulus_points(n: int, seed: int, exterior_only: bool, radius_max: float, with_time: bool):
    dim = 5 + (1 if with_time else 0)
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sob.random(n)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    from scipy.special import ndtri

    g = ndtri(u[:, :4])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if exterior_only:
        r = radius_max ** u[:, 4]
    else:
        r = (radius_max + 1.0) ** u[:, 4] - 1.0
    t = 2 * math.pi * u[:, 5] if with_time else np.zeros(n)
    return g * r[:, None], t


def _evaluators(f, j: int):
    """One vectorised evaluator per multi-index, plus its order."""
    out = []
    if isinstance(f, AveragedSymbol):
        for alpha in multi_indices(j):
            g = f
            for var, k in zip(("x1", "x2", "xi1", "xi2"), alpha):
                for _ in range(k):
                    g = g.derivative(var)
            out.append((alpha, lambda z, t, g=g: g(z)))
        return out, False
    f = as_symbol(f)
    trees = [derivative_multi(f, alpha).root for alpha in multi_indices(j)]
    bundle = CompiledBundle(trees)
    for i, alpha in enumerate(multi_indices(j)):
        out.append((alpha, lambda z, t, i=i: bundle(z, t)[..., i]))
    return out, f.time_dependent


def seminorm_estimate(f, j: int, order: float, n_samples: int, exterior_only: bool = True,
                      seed: int = 0, weighted: bool = True, radius_max: float = 20.0,
                      refine: bool = True) -> SeminormEstimate:
    """Estimate sum_{|a|<=j} sup |d^a f| (1+|z|^2)^{|a|/2 - order}.

    Sups run over a scrambled Sobol sample of the annulus 1 <= |z| <= radius_max
    (or of the ball when ``exterior_only`` is False) and, for time-dependent
    symbols, over t.  Each new running maximum ("record") of the sample is
    then polished by a Nelder-Mead search; since the records of a prefix are a
    prefix of the records, estimates are monotone in the sample size for a
    fixed seed.  With ``weighted=False`` the plain sup of |d^a f| is used.
    """
    if j < 0 or j > 4:
        raise ValueError("derivative count j must lie in 0..4")
    evaluators, with_time = _evaluators(f, j)
    z, t = _annulus_points(n_samples, seed, exterior_only, radius_max, with_time)
    r_lo = 1.0 if exterior_only else 0.0

    def weight(zz):
        return (1.0 + np.sum(zz * zz, axis=-1))

    def clamp(zz):
        r = np.linalg.norm(zz)
        if r == 0.0:
            return zz
        return zz * (min(max(r, r_lo), radius_max) / r)

    total = 0.0
    per_index = {}
    for alpha, ev in evaluators:
        k = sum(alpha)
        vals = np.abs(ev(z, t))
        if weighted:
            vals = vals * weight(z) ** (k / 2.0 - order)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        best = float(vals.max(initial=0.0))
        if refine and best > 0.0:
            running = np.maximum.accumulate(vals)
            records = np.flatnonzero(np.r_[True, running[1:] > running[:-1]])

            def objective(p):
                zz = clamp(p[:4])[None, :]
                tt = np.array([p[4] if with_time else 0.0])
                v = abs(float(ev(zz, tt)[0]))
                if weighted:
                    v *= float(weight(zz)[0]) ** (k / 2.0 - order)
                return -v if math.isfinite(v) else 0.0

            for idx in records:
                x0 = np.r_[z[idx], t[idx]]
                res = minimize(objective, x0, method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 600})
                best = max(best, -float(res.fun))
        per_index[alpha] = best
        total += best
    return SeminormEstimate(j=j, order=order, value=total, sample_size=n_samples,
                            restricted_to_unit_exterior=exterior_only, weighted=weighted,
                            per_index=per_index)
