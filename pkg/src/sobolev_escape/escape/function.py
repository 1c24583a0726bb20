"""The glued global escape function and its trajectory-defined constituents.

Everything is computed on unit points zeta = z/|z| and lifted by degree-2
homogeneity.  Along the projected flow (time tau, dt = rho^2 dtau) the
augmented state carries G = 2 int B dtau, so rho(tau)^2 = rho^2 e^G, and
I = int m e^G dtau.  Then

    l+(z) = rho^2 (-I + e^G / 2f)   integrated forward until the U+ tube,
    l-(z) = rho^2 (-I - e^G / 2f)   integrated backward until the U- tube,

with f evaluated at the entry point.  The backward run also yields the
hitting time t = (time to reach the U- tube) + offset used by the ramp.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..flow import InvariantSetReport, ShellGeometry, tube_entry, tube_samples
from ..flow.integrator import ENTERED_SET, REACHED_T, STATUS_NAMES, integrate_batch
from ..flow.trajectory import ProjectedFlow
from .blend import BlendedBracket, build_m
from .config import EscapeConfig, EscapeError
from .local import geometry_for, k_bracket
from .ramp import ramp, ramp_derivative, ramp_saturation


@dataclass
class ShellValues:
    """Degree-0 data at unit points: l+- = rho^2 L+-, eta = ramp(t_hit)."""

    zeta: np.ndarray
    level: np.ndarray
    L_plus: np.ndarray
    L_minus: np.ndarray
    t_hit: np.ndarray
    eta: np.ndarray
    m: np.ndarray
    failed: np.ndarray
    reasons: dict = field(default_factory=dict)

    @property
    def a_tilde(self) -> np.ndarray:
        # eta is exactly 0 or 1 wherever one of L+- was not computed
        lp = np.where(self.eta > 0, self.L_plus, 0.0)
        lm = np.where(self.eta < 1, self.L_minus, 0.0)
        return self.eta * lp + (1.0 - self.eta) * lm


def _augmented_rhs(m: BlendedBracket, c_plus, c_minus):
    def extra(zeta, B, y, rows):
        mv = m.evaluate(zeta, c_plus[rows], c_minus[rows], B)
        return np.stack([2.0 * B, mv * np.exp(y[:, 4])], axis=1)
    return extra


class EscapeFunction:
    """a(z) = (1 - chi(|z|)) |z|^2 [eta L+ + (1 - eta) L-](z/|z|).

    Evaluations are batched; results per unit point are cached under the
    exact bytes of zeta, so caching never changes a value.
    """

    def __init__(self, geom: ShellGeometry, cfg: EscapeConfig, report: InvariantSetReport, m: BlendedBracket,
                 info: dict, use_cache: bool = True):
        self.geom = geom
        self.cfg = cfg
        self.report = report
        self.m = m
        self.info = info
        self.use_cache = use_cache
        self.e0 = float(report.level)
        self.delta_hat = float(info["delta_hat"])
        self._cache: dict[bytes, tuple] = {}

    @property
    def h(self):
        return self.geom.h

    # -- trajectory runs ------------------------------------------------------
    def _run(self, zeta, lev, c_plus, c_minus, sign: int, tau_cap: float, extra_time: float = 0.0):
        """Augmented run towards the U+ (sign +1) or U- (sign -1) tube.

        Returns (L, tau_entry, status); tau_entry is signed.  With
        ``extra_time`` > 0 the run continues that much beyond entry.
        """
        target = c_plus if sign > 0 else c_minus
        radius = self.m.r_plus if sign > 0 else self.m.r_minus
        extra = _augmented_rhs(self.m, c_plus, c_minus)
        res = tube_entry(self.geom, zeta, lev, target, radius, sign, tau_cap, self.cfg.tol,
                         extra0=np.zeros((len(zeta), 2)), extra_rhs=extra)
        y = res.state
        if extra_time > 0 and np.any(res.entered):
            idx = np.flatnonzero(res.entered)
            cp, cm = c_plus[idx], c_minus[idx]
            flow = ProjectedFlow(self.geom, lev[idx], extra_rhs=_augmented_rhs(self.m, cp, cm))
            cont = integrate_batch(flow.rhs, y[idx], sign * extra_time, rtol=self.cfg.tol,
                                   atol=self.cfg.tol * 1e-2, project=flow.project)
            y = y.copy()
            y[idx] = cont.y
        f_end, _ = self.geom.density(y[:, :4])
        L = -y[:, 5] + sign * np.exp(y[:, 4]) / (2.0 * f_end)
        return L, res.tau, res.status

    def shell_values(self, zeta, levels=None) -> ShellValues:
        """Constituents at unit points (computed in one batch per direction)."""
        zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
        n = len(zeta)
        out = None
        if self.use_cache and n:
            keys = [row.tobytes() for row in zeta]
            hit = np.array([k in self._cache for k in keys])
            if hit.all():
                return self._from_cache(zeta, keys)
            todo = np.flatnonzero(~hit)
            fresh = self._compute(zeta[todo], None if levels is None else np.asarray(levels)[todo])
            for j, i in enumerate(todo):
                self._cache[keys[i]] = (fresh.level[j], fresh.L_plus[j], fresh.L_minus[j], fresh.t_hit[j],
                                        fresh.eta[j], fresh.m[j], fresh.failed[j])
            out = self._from_cache(zeta, keys)
            out.reasons = fresh.reasons
            return out
        return self._compute(zeta, levels)

    def _from_cache(self, zeta, keys) -> ShellValues:
        rows = np.array([self._cache[k] for k in keys], dtype=float).reshape(len(keys), 7)
        return ShellValues(zeta, rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4], rows[:, 5],
                           rows[:, 6].astype(bool))

    def _compute(self, zeta, levels=None) -> ShellValues:
        n = len(zeta)
        lev = self.geom.value(zeta) if levels is None else np.broadcast_to(np.asarray(levels, float), (n,)).copy()
        c_plus, c_minus = self.m.centres(lev)
        _, _, _, d_minus = self.m.weights(zeta, c_plus, c_minus)
        B = self.geom.bracket_h0(zeta)
        m_here = self.m.evaluate(zeta, c_plus, c_minus, B)
        f_here, _ = self.geom.density(zeta)
        eps = self.cfg.eps
        offset = self.cfg.hitting_offset
        L_plus = np.full(n, np.nan)
        L_minus = np.full(n, np.nan)
        t_hit = np.full(n, np.nan)
        failed = np.zeros(n, dtype=bool)
        reasons: dict[str, int] = {}

        inside = d_minus <= self.m.r_minus
        t_hit[inside] = -np.inf
        L_minus[inside] = -1.0 / (2.0 * f_here[inside])
        back = np.flatnonzero(~inside)
        if back.size:
            # past this backward time the ramp is saturated and l- is not needed
            cap = ramp_saturation(eps) - offset + eps
            L, tau, status = self._run(zeta[back], lev[back], c_plus[back], c_minus[back], -1, cap)
            ent = status == ENTERED_SET
            L_minus[back[ent]] = L[ent]
            t_hit[back[ent]] = -tau[ent] + offset
            t_hit[back[status == REACHED_T]] = np.inf
            bad = ~np.isin(status, (ENTERED_SET, REACHED_T))
            failed[back[bad]] = True
            for s in np.unique(status[bad]):
                reasons[f"backward {STATUS_NAMES.get(int(s), s)}"] = int(np.sum(status[bad] == s))
        eta = ramp(np.where(np.isnan(t_hit), -np.inf, t_hit), eps)
        fwd = np.flatnonzero((eta > 0) & ~failed)
        if fwd.size:
            L, tau, status = self._run(zeta[fwd], lev[fwd], c_plus[fwd], c_minus[fwd], +1, self.cfg.t1_cap)
            ent = status == ENTERED_SET
            L_plus[fwd[ent]] = L[ent]
            failed[fwd[~ent]] = True
            if np.any(~ent):
                reasons["t1_cap exceeded (U+ not reached)"] = int(np.sum(~ent))
        return ShellValues(zeta, lev, L_plus, L_minus, t_hit, eta, m_here, failed, reasons)

    # -- public evaluators --------------------------------------------------------
    def _split(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        rho = np.linalg.norm(z, axis=1)
        if np.any(rho == 0):
            raise ValueError("the escape function is evaluated away from the origin")
        return z, rho, z / rho[:, None]

    def __call__(self, z, strict: bool = True) -> np.ndarray:
        z, rho, zeta = self._split(z)
        sv = self.shell_values(zeta)
        if strict and np.any(sv.failed):
            raise EscapeError(f"escape evaluation failed at {int(sv.failed.sum())} point(s): {sv.reasons}")
        a = (1.0 - self.cfg.cutoff(rho)) * rho ** 2 * sv.a_tilde
        return np.where(sv.failed, np.nan, a)

    def ell(self, z, sign: int, extra_time: float = 0.0) -> np.ndarray:
        """l+ (sign +1) or l- (sign -1) without gluing or cut-off.

        ``extra_time`` continues the run beyond tube entry; the value must
        not change since m = {h, k+-} inside the tube.
        """
        z, rho, zeta = self._split(z)
        lev = self.geom.value(zeta)
        c_plus, c_minus = self.m.centres(lev)
        L, _, status = self._run(zeta, lev, c_plus, c_minus, sign, self.cfg.t1_cap, extra_time)
        if np.any(status != ENTERED_SET):
            raise EscapeError(f"t1_cap = {self.cfg.t1_cap} exceeded: the orbit did not reach the "
                              f"{'U+' if sign > 0 else 'U-'} tube (non-simple structure or tubes too small)")
        return rho ** 2 * L

    def eta(self, z) -> np.ndarray:
        _, _, zeta = self._split(z)
        return self.shell_values(zeta).eta

    def bracket(self, z) -> np.ndarray:
        """{h, a} from the decomposition m + (L+ - L-) ramp'(t) minus the cut-off term.

        Uses d/dt eta(Phi^t z) = ramp'(t_hit) / rho^2 (the hitting-time
        cocycle) and {h, l+-} = m.  An independent route to the flow
        finite difference used for certification.
        """
        z, rho, zeta = self._split(z)
        sv = self.shell_values(zeta)
        diff = np.where((sv.eta > 0) & (sv.eta < 1), sv.L_plus - sv.L_minus, 0.0)
        core = sv.m + diff * ramp_derivative(np.where(np.isnan(sv.t_hit), -np.inf, sv.t_hit), self.cfg.eps)
        chi = self.cfg.cutoff(rho)
        B = self.geom.bracket_h0(zeta)
        out = (1.0 - chi) * core - rho ** 2 * sv.a_tilde * self.cfg.cutoff_derivative(rho) * B / rho
        return np.where(sv.failed, np.nan, out)

    def sup_gap(self, zeta) -> float:
        """max |L+ - L-| over the gluing region among the given unit points."""
        sv = self.shell_values(zeta)
        mid = (sv.eta > 0) & (sv.eta < 1) & ~sv.failed
        return float(np.max(np.abs(sv.L_plus[mid] - sv.L_minus[mid]), initial=0.0))

    def clear_cache(self):
        self._cache.clear()

    def to_dict(self) -> dict:
        return {"h": str(self.h), "e0": self.e0, "config": self.cfg.to_dict(), **self.info}


def global_escape(h, cfg: EscapeConfig | None, report: InvariantSetReport, n_check: int = 10_000,
                  seed: int = 0, use_cache: bool = True) -> EscapeFunction:
    """Glue l+ and l- into an escape function for the shell described by ``report``.

    Needs simple structure; each component of the shell carries its own
    pair of tubes and the reported delta_hat is the minimum over components.
    """
    cfg = cfg or EscapeConfig()
    if report.verdict != "true":
        raise EscapeError(f"simple structure not established (verdict {report.verdict!r})")
    geom = geometry_for(h, cfg)
    m, info = build_m(geom, cfg, report, n_check=n_check, seed=seed)
    info["per_component_delta"] = _per_component_delta(geom, report, m)
    return EscapeFunction(geom, cfg, report, m, info, use_cache=use_cache)


def _per_component_delta(geom, report, m: BlendedBracket) -> list[dict]:
    comps = sorted({p.component for p in report.attractors + report.repellors})
    out = []
    for c in comps:
        att = [p for p in report.attractors if p.component == c]
        rep = [p for p in report.repellors if p.component == c]
        vals = []
        if att:
            vals.append(np.min(k_bracket(geom, tube_samples(geom, att, 2 * m.r_plus, report.level), +1)))
        if rep:
            vals.append(np.min(k_bracket(geom, tube_samples(geom, rep, 2 * m.r_minus, report.level), -1)))
        out.append({"component": int(c), "min_tube_bracket": float(min(vals)) if vals else None})
    return out


def extend_escape(h, cfg: EscapeConfig, z, sign: int, report: InvariantSetReport,
                  extra_time: float = 0.0, escape: EscapeFunction | None = None) -> np.ndarray:
    """l+-(z) by the finite-time formula (entry into the U+- tube plus ``extra_time``)."""
    esc = escape or global_escape(h, cfg, report)
    return esc.ell(z, sign, extra_time)


def gluing_eta(h, cfg: EscapeConfig, z, report: InvariantSetReport,
               escape: EscapeFunction | None = None) -> np.ndarray:
    esc = escape or global_escape(h, cfg, report)
    return esc.eta(z)
