"""Point-cloud sampling of Z = h^{-1}(e0) on the unit sphere."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

from .geometry import ShellGeometry
from .trajectory import as_geometry


class EmptySurfaceError(ValueError):
    """No regular points of the requested level were found."""


class CriticalLevelError(EmptySurfaceError):
    """The gradient vanishes on the whole sampled shell."""


@dataclass(frozen=True)
class EnergyShellSpec:
    h: object
    e0: float
    newton_tol: float = 1e-10
    regularity_floor: float = 1e-4


@dataclass
class SurfaceSample:
    points: np.ndarray  # [n, 4], unit vectors
    tangent_frames: np.ndarray  # [n, 2, 4]
    component_id: np.ndarray  # [n]
    level: float
    seeds_tried: int
    irregular_rejected: int
    stats: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return int(self.component_id.max()) + 1 if len(self.component_id) else 0

    def component(self, k: int) -> np.ndarray:
        return self.points[self.component_id == k]


def sphere_points(n: int, seed: int) -> np.ndarray:
    """Quasi-random points on S^3 (scrambled Sobol pushed through the normal quantile)."""
    sob = qmc.Sobol(d=4, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    u = sob.random_base2(m)[:n]
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def label_components(points: np.ndarray, scale: float = 6.0) -> np.ndarray:
    """Connected components of the eps-neighbour graph, eps = scale * median NN distance.

    Labels are renumbered so that component 0 holds the lexicographically
    smallest point, and so on, making the numbering seed-independent.
    """
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=int)
    if n == 1:
        return np.zeros(1, dtype=int)
    tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    eps = scale * float(np.median(d[:, 1]))
    pairs = tree.query_pairs(eps, output_type="ndarray")
    adj = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    reps = []
    for lab in np.unique(labels):
        members = points[labels == lab]
        reps.append((tuple(members[np.lexsort(members.T[::-1])][0]), lab))
    reps.sort()
    remap = {lab: i for i, (_, lab) in enumerate(reps)}
    return np.array([remap[l] for l in labels], dtype=int)


def sample_energy_surface(spec: EnergyShellSpec, n: int, seed: int = 0,
                          geometry: ShellGeometry | None = None, min_component_fraction: float = 0.01) -> SurfaceSample:
    """At least n/2 points of Z_{e0} with tangent frames and component labels.

    Quasi-random seeds on S^3 are pushed onto the level by Newton steps
    along grad h.  Points whose spherical gradient falls below the
    regularity floor are rejected.  Tiny clusters (below
    ``min_component_fraction`` of the sample) are merged into their nearest
    component, since they come from gaps in the point cloud.
    """
    geom = geometry or as_geometry(spec.h)
    tried = 0
    kept = []
    irregular = 0
    batch = max(2 * n, 256)
    rounds = 0
    while sum(len(k) for k in kept) < n and rounds < 4:
        seeds = sphere_points(batch, seed + 7919 * rounds)
        tried += len(seeds)
        with np.errstate(all="ignore"):
            zeta, res, ok = geom.project_to_level(seeds, spec.e0, tol=spec.newton_tol * 1e-2, max_iter=60)
            gnorm = geom.spherical_gradient_norm(zeta)
        regular = gnorm >= spec.regularity_floor
        irregular += int(np.sum(ok & ~regular))
        good = ok & regular & (np.abs(res) <= spec.newton_tol)
        kept.append(zeta[good])
        rounds += 1
        if rounds == 1 and good.mean() < 0.01:
            break
    pts = np.concatenate(kept) if kept else np.zeros((0, 4))
    if len(pts) < max(0.01 * tried, 1):
        with np.errstate(all="ignore"):
            gmax = np.nanmax(geom.spherical_gradient_norm(sphere_points(512, seed)))
        if not np.isfinite(gmax) or gmax < spec.regularity_floor:
            raise CriticalLevelError("critical value everywhere: grad h vanishes on the sampled sphere")
        raise EmptySurfaceError(f"no regular surface found: empty energy surface at e0 = {spec.e0!r}")
    # deduplicate (Newton can send several seeds to the same point)
    if len(pts) > 1:
        _, first = np.unique(np.round(pts, 12), axis=0, return_index=True)
        pts = pts[np.sort(first)]
    pts = pts[:n]
    labels = label_components(pts)
    counts = np.bincount(labels)
    small = np.flatnonzero(counts < min_component_fraction * len(pts))
    if small.size and small.size < len(counts):
        big_mask = ~np.isin(labels, small)
        tree = cKDTree(pts[big_mask])
        for s in small:
            idx = np.flatnonzero(labels == s)
            _, j = tree.query(pts[idx])
            labels[idx] = labels[big_mask][j]
        _, labels = np.unique(labels, return_inverse=True)
    frames = geom.tangent_frame(pts)
    return SurfaceSample(pts, frames, labels, float(spec.e0), tried, irregular, {
        "accepted": int(len(pts)), "acceptance_rate": float(len(pts)) / tried,
        "max_level_residual": float(np.max(np.abs(geom.value(pts) - spec.e0))),
    })
