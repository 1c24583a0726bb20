"""Limit sets of the projected flow: fixed points, closed orbits, simple structure."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import ShellGeometry
from .integrator import REACHED_T, integrate_batch
from .surface import EnergyShellSpec, SurfaceSample, sample_energy_surface
from .trajectory import ProjectedFlow, as_geometry


class WeakHyperbolicityError(RuntimeError):
    pass


@dataclass
class FixedPoint:
    point: np.ndarray
    eigenvalues: np.ndarray
    kind: str
    component: int
    divergence: float

    def to_dict(self) -> dict:
        return {
            "type": "fixed_point", "point": self.point.tolist(), "kind": self.kind,
            "component": self.component, "divergence": self.divergence,
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
        }


@dataclass
class ClosedOrbit:
    samples: np.ndarray
    period: float
    kind: str
    component: int

    def to_dict(self) -> dict:
        return {"type": "closed_orbit", "period": self.period, "kind": self.kind,
                "component": self.component, "samples": self.samples.tolist()}


@dataclass
class InvariantSetReport:
    level: float
    attractors: list
    repellors: list
    others: list
    n_components: int
    verdict: str  # "true" | "false" | "inconclusive"
    orbit_stats: dict
    tube_radius: float | None = None
    weak_hyperbolicity: dict = field(default_factory=dict)

    @property
    def simple_structure(self) -> bool:
        return self.verdict == "true"

    def per_component(self) -> list[dict]:
        out = []
        for k in range(self.n_components):
            out.append({
                "component": k,
                "attractors": [s.to_dict() for s in self.attractors if s.component == k],
                "repellors": [s.to_dict() for s in self.repellors if s.component == k],
            })
        return out

    def to_dict(self) -> dict:
        return {
            "level": self.level, "n_components": self.n_components,
            "simple_structure": self.simple_structure, "verdict": self.verdict,
            "components": self.per_component(),
            "other_sets": [s.to_dict() for s in self.others],
            "orbit_stats": self.orbit_stats, "tube_radius": self.tube_radius,
            "weak_hyperbolicity": self.weak_hyperbolicity,
        }


# ---------------------------------------------------------------------------
# fixed points


def tangent_jacobian(geom: ShellGeometry, zeta: np.ndarray) -> np.ndarray:
    """Linearisation of the projected field on T Z in the oriented tangent frame."""
    frame = geom.tangent_frame(zeta)
    D = geom.projected_jacobian(zeta)
    return np.einsum("...ai,...ij,...bj->...ab", frame, D, frame)


def refine_fixed_point(geom: ShellGeometry, zeta, level: float | None = None, tol: float = 1e-14,
                       max_iter: int = 50) -> tuple[np.ndarray, bool]:
    """Newton iteration on Xt = 0 written in the tangent frame (a 2 x 2 system)."""
    zeta = np.asarray(zeta, dtype=float) / np.linalg.norm(zeta)
    lev = float(geom.value(zeta[None])[0]) if level is None else level
    for _ in range(max_iter):
        Xt = geom.projected_field(zeta[None])[0]
        if np.linalg.norm(Xt) <= tol:
            return zeta, True
        frame = geom.tangent_frame(zeta[None])[0]
        J = tangent_jacobian(geom, zeta[None])[0]
        try:
            du = -np.linalg.solve(J, frame @ Xt)
        except np.linalg.LinAlgError:
            return zeta, False
        zeta, _, _ = geom.project_to_level((zeta + du @ frame)[None], lev, tol=1e-16, max_iter=5)
        zeta = zeta[0]
    return zeta, bool(np.linalg.norm(geom.projected_field(zeta[None])[0]) <= 1e3 * tol)


def continue_fixed_points(geom: ShellGeometry, base: np.ndarray, levels, tol: float = 1e-13,
                          max_iter: int = 40) -> np.ndarray:
    """Move fixed points to nearby levels by Gauss-Newton on (Xt, h - level, |zeta|^2 - 1).

    ``base`` is [4] or [n, 4]; ``levels`` broadcasts to [n].  Returns [n, 4].
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    base = np.asarray(base, dtype=float)
    z = np.broadcast_to(base, (len(levels), 4)).copy()
    for _ in range(max_iter):
        Xt = geom.projected_field(z)
        val, g = geom.value_and_grad(z)
        F = np.concatenate([Xt, (val - levels)[:, None], (np.sum(z * z, axis=1) - 1.0)[:, None]], axis=1)
        if np.max(np.abs(F)) <= tol:
            break
        J = np.concatenate([geom.projected_jacobian(z), g[:, None, :], 2.0 * z[:, None, :]], axis=1)
        z = z - np.einsum("nij,nj->ni", np.linalg.pinv(J), F)
    return z


def _classify_eigs(eigs: np.ndarray) -> str:
    re = eigs.real
    if np.all(re < 0):
        return "attractor"
    if np.all(re > 0):
        return "repellor"
    if np.any(re > 0) and np.any(re < 0):
        return "saddle"
    return "degenerate"


def _cluster(points: np.ndarray, eps: float) -> tuple[list[np.ndarray], np.ndarray]:
    """Greedy eps-ball clustering in lexicographic order; returns representatives and labels."""
    order = np.lexsort(points.T[::-1])
    reps: list[np.ndarray] = []
    labels = np.full(len(points), -1, dtype=int)
    for i in order:
        for k, r in enumerate(reps):
            if np.linalg.norm(points[i] - r) <= eps:
                labels[i] = k
                break
        else:
            reps.append(points[i].copy())
            labels[i] = len(reps) - 1
    return reps, labels


# ---------------------------------------------------------------------------
# closed orbits


def _closed_orbit(geom: ShellGeometry, start: np.ndarray, level: float, tau_max: float,
                  tol: float = 1e-10, close_eps: float = 1e-3):
    """Return (samples, period) if the orbit through ``start`` closes up, else None."""
    flow = ProjectedFlow(geom, [level])
    res = integrate_batch(flow.rhs, start[None], tau_max, rtol=tol, atol=tol * 1e-2,
                          project=flow.project, record=True, h_max=0.05)
    times, states = res.history[0]
    v = geom.projected_field(start[None])[0]
    if np.linalg.norm(v) < 1e-8:
        return None
    sec = (states - start) @ v
    dist = np.linalg.norm(states - start, axis=1)
    left = np.flatnonzero(dist > 10 * close_eps)
    if not left.size:
        return None
    for i in range(left[0], len(times) - 1):
        if sec[i] < 0 <= sec[i + 1] and dist[i] < close_eps * 10:
            w = -sec[i] / (sec[i + 1] - sec[i])
            period = float(times[i] + w * (times[i + 1] - times[i]))
            return states[: i + 2], period
    return None


# ---------------------------------------------------------------------------


def classify_limit_sets(h, spec: EnergyShellSpec, n_orbits: int = 200, tau_max: float = 60.0,
                        cluster_eps: float = 1e-4, seed: int = 0, tol: float = 1e-10,
                        sample: SurfaceSample | None = None, speed_tol: float = 1e-7) -> InvariantSetReport:
    """Forward and backward limits of a fan of orbits, clustered and linearised."""
    geom = as_geometry(h)
    if sample is None:
        sample = sample_energy_surface(spec, max(4 * n_orbits, 1000), seed, geometry=geom)
    idx = np.linspace(0, len(sample.points) - 1, min(n_orbits, len(sample.points))).astype(int)
    starts = sample.points[idx]
    start_comp = sample.component_id[idx]
    m = len(starts)
    flow = ProjectedFlow(geom, np.full(2 * m, spec.e0))
    y0 = np.concatenate([starts, starts])
    t_end = np.concatenate([np.full(m, tau_max), np.full(m, -tau_max)])
    res = integrate_batch(flow.rhs, y0, t_end, rtol=tol, atol=tol * 1e-2, project=flow.project)
    ends = res.y
    speed = np.linalg.norm(geom.projected_field(ends), axis=1)
    converged = (res.status == REACHED_T) & (speed <= speed_tol)

    reps, labels = _cluster(ends[converged], cluster_eps) if converged.any() else ([], np.zeros(0, int))
    tree = cKDTree(sample.points)
    fixed: list[FixedPoint] = []
    for r in reps:
        p, ok = refine_fixed_point(geom, r, spec.e0)
        J = tangent_jacobian(geom, p[None])[0]
        eigs = np.linalg.eigvals(J)
        comp = int(sample.component_id[tree.query(p)[1]])
        div = float(geom.divergence_weighted(p[None])[0])
        fixed.append(FixedPoint(p, eigs, _classify_eigs(eigs) if ok else "unrefined", comp, div))
    forward_ok = np.zeros(m, dtype=bool)
    backward_ok = np.zeros(m, dtype=bool)
    conv_idx = np.flatnonzero(converged)
    for j, lab in zip(conv_idx, labels):
        kind = fixed[lab].kind
        if j < m:
            forward_ok[j] = kind == "attractor"
        else:
            backward_ok[j - m] = kind == "repellor"

    # orbits that did not settle: look for closed orbits
    closed: list[ClosedOrbit] = []
    unsettled = np.flatnonzero(~converged)
    for j in unsettled:
        direction = 1 if j < m else -1
        hit = None
        for orb in closed:
            if np.min(np.linalg.norm(orb.samples - ends[j], axis=1)) < 1e-3:
                hit = orb
                break
        if hit is None:
            found = _closed_orbit(geom, ends[j], spec.e0, 4 * tau_max, tol)
            if found is None:
                continue
            samples, period = found
            kind = "attractor" if direction > 0 else "repellor"
            comp = int(sample.component_id[tree.query(samples[0])[1]])
            hit = ClosedOrbit(samples, period, kind, comp)
            closed.append(hit)
        if direction > 0:
            forward_ok[j] = hit.kind == "attractor"
        else:
            backward_ok[j - m] = hit.kind == "repellor"

    settled = converged.copy()
    for j in unsettled:
        settled[j] = forward_ok[j] if j < m else backward_ok[j - m]
    fail_fraction = float(np.mean(~settled))
    attractors = [f for f in fixed if f.kind == "attractor"] + [c for c in closed if c.kind == "attractor"]
    repellors = [f for f in fixed if f.kind == "repellor"] + [c for c in closed if c.kind == "repellor"]
    others = [f for f in fixed if f.kind not in ("attractor", "repellor")]
    # orbits that start on K itself are excluded from the verdict
    on_K = np.zeros(m, dtype=bool)
    for f in fixed:
        on_K |= np.linalg.norm(starts - f.point, axis=1) < cluster_eps
    consistent = bool(np.all((forward_ok & backward_ok) | on_K | ~(settled[:m] & settled[m:])))
    if fail_fraction > 0.01:
        verdict = "inconclusive"
    elif consistent and attractors and repellors and not others:
        verdict = "true"
    else:
        verdict = "false"
    # every component needs its own attractor and repellor
    for k in range(sample.n_components):
        if not any(s.component == k for s in attractors) or not any(s.component == k for s in repellors):
            if verdict == "true":
                verdict = "false"
    stats = {
        "orbits": int(m), "tau_max": tau_max, "converged_fraction": float(np.mean(converged)),
        "unsettled_fraction": fail_fraction, "forward_to_attractor": int(forward_ok.sum()),
        "backward_to_repellor": int(backward_ok.sum()), "starts_per_component":
            np.bincount(start_comp, minlength=sample.n_components).tolist(),
    }
    return InvariantSetReport(spec.e0, attractors, repellors, others, sample.n_components, verdict, stats)


# ---------------------------------------------------------------------------
# tubes around invariant sets


class InvariantSet:
    """Distance queries to K+ or K- on the base level and, for fixed points, on nearby levels."""

    def __init__(self, geom: ShellGeometry, members: list, base_level: float):
        if not members:
            raise ValueError("empty invariant set")
        self.geom = geom
        self.members = members
        self.base_level = float(base_level)
        self.fixed = np.array([m.point for m in members if isinstance(m, FixedPoint)]).reshape(-1, 4)
        orbits = [m.samples for m in members if isinstance(m, ClosedOrbit)]
        self.orbit_points = np.concatenate(orbits) if orbits else np.zeros((0, 4))
        self._cache: dict[bytes, np.ndarray] = {}

    def points_at(self, levels) -> np.ndarray:
        """Fixed points continued to each level: shape [n, k, 4]."""
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        if self.orbit_points.size and np.any(levels != self.base_level):
            raise NotImplementedError("off-level continuation of closed orbits is not supported")
        out = np.empty((len(levels), len(self.fixed), 4))
        base_mask = levels == self.base_level
        out[base_mask] = self.fixed
        todo = np.flatnonzero(~base_mask)
        if todo.size:
            uniq, inv = np.unique(levels[todo], return_inverse=True)
            cont = np.empty((len(uniq), len(self.fixed), 4))
            missing = []
            for i, lev in enumerate(uniq):
                key = np.float64(lev).tobytes()
                if key in self._cache:
                    cont[i] = self._cache[key]
                else:
                    missing.append(i)
            if missing:
                miss = np.array(missing)
                for k, p in enumerate(self.fixed):
                    cont[miss, k] = continue_fixed_points(self.geom, p, uniq[miss])
                for i in missing:
                    self._cache[np.float64(uniq[i]).tobytes()] = cont[i].copy()
            out[todo] = cont[inv]
        return out

    def distance(self, zeta, levels=None) -> np.ndarray:
        zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
        d = np.full(len(zeta), np.inf)
        if len(self.fixed):
            pts = self.fixed[None] if levels is None else self.points_at(levels)
            d = np.min(np.linalg.norm(zeta[:, None, :] - pts, axis=2), axis=1)
        if len(self.orbit_points):
            tree = cKDTree(self.orbit_points)
            d = np.minimum(d, tree.query(zeta)[0])
        return d


def tube_samples(geom: ShellGeometry, members: list, radius: float, level: float, n_radial: int = 6,
                 n_angle: int = 24) -> np.ndarray:
    """Points of Z within ``radius`` of the set: rings in the tangent plane of each fixed point."""
    pts = []
    for m in members:
        centres = [m.point] if isinstance(m, FixedPoint) else list(m.samples[:: max(1, len(m.samples) // 32)])
        for c in centres:
            frame = geom.tangent_frame(c[None])[0]
            for r in np.linspace(radius / n_radial, radius, n_radial) * 0.999:
                th = 2 * np.pi * np.arange(n_angle) / n_angle
                ring = c + r * (np.cos(th)[:, None] * frame[0] + np.sin(th)[:, None] * frame[1])
                proj, _, ok = geom.project_to_level(ring, level)
                pts.append(proj[ok])
            pts.append(c[None])
    return np.concatenate(pts)


def weak_hyperbolicity_check(report: InvariantSetReport, h, f_tilde=None, tube_radius: float = 0.1,
                             radius_floor: float = 1e-3) -> tuple[float, float]:
    """Extremes of div_{f mu}(Xt) over tubes: max over the K+ tube and min over the K- tube.

    The radius halves until the signs are uniform (negative around K+,
    positive around K-).  The certified radius is stored on the report.
    """
    if not report.attractors:
        raise WeakHyperbolicityError("empty attractor K+: nothing to certify")
    if not report.repellors:
        raise WeakHyperbolicityError("empty repellor K-: nothing to certify")
    geom = h if isinstance(h, ShellGeometry) and f_tilde is None else ShellGeometry(
        h.h if isinstance(h, ShellGeometry) else h, f_tilde)
    r = tube_radius
    while r >= radius_floor:
        plus = tube_samples(geom, report.attractors, r, report.level)
        minus = tube_samples(geom, report.repellors, r, report.level)
        m_plus = float(np.max(geom.divergence_weighted(plus)))
        m_minus = float(np.min(geom.divergence_weighted(minus)))
        if m_plus < 0 and m_minus > 0:
            report.tube_radius = r
            report.weak_hyperbolicity = {"margin_plus": m_plus, "margin_minus": m_minus, "radius": r,
                                         "samples": [int(len(plus)), int(len(minus))],
                                         "f_tilde": geom.f_tilde.text() if geom.f_tilde is not None else "1"}
            return m_plus, m_minus
        r *= 0.5
    raise WeakHyperbolicityError("weak hyperbolicity not certified with f_tilde; supply a different density f_tilde")
