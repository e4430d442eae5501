"""DBSCAN over person-box centroids and the safe/violator partition.

With the default min_pts of 2 (the point itself counts), clusters are
exactly the connected components of the graph joining centroids at
distance <= eps, and isolated people are noise, i.e. safe.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .geometry import BoundingBox, Point, centroid

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 200.0  # pixels; roughly two metres at the reference camera scale
    min_pts: int = 2    # neighbourhood size, the point itself included

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class ClusterLabels:
    labels: Tuple[int, ...]  # per point: NOISE or a cluster id 0..n_clusters-1

    @property
    def n_clusters(self) -> int:
        return max(self.labels, default=NOISE) + 1

    def members(self, cluster_id: int) -> Tuple[int, ...]:
        return tuple(i for i, l in enumerate(self.labels) if l == cluster_id)


@dataclass(frozen=True)
class ViolationReport:
    safe_indices: Tuple[int, ...]
    clusters: Tuple[Tuple[int, ...], ...]
    edges: Tuple[Tuple[int, int], ...]  # (i, j) with i < j, same cluster, distance <= eps

    @property
    def violator_count(self) -> int:
        return sum(len(c) for c in self.clusters)


def dbscan(points: Sequence[Point], params: DbscanParams = DbscanParams()) -> ClusterLabels:
    """Standard DBSCAN with Euclidean distance.

    A point is core iff at least min_pts points (itself included) lie within
    eps.  Cluster ids are assigned in order of first discovery scanning
    points by ascending index; border points join the first cluster that
    reaches them; everything unreachable from a core point is NOISE.
    """
    n = len(points)
    if n == 0:
        return ClusterLabels(())
    pts = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if not np.isfinite(pts).all():
        raise ValueError("points must have finite coordinates")
    diff = pts[:, None, :] - pts[None, :, :]
    within = (diff ** 2).sum(axis=2) <= params.eps * params.eps
    core = within.sum(axis=1) >= params.min_pts
    labels = np.full(n, NOISE, dtype=np.int64)
    next_id = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = next_id
        queue = [i]
        while queue:
            p = queue.pop(0)
            for q in np.nonzero(within[p])[0]:
                if labels[q] == NOISE:
                    labels[q] = next_id
                    if core[q]:
                        queue.append(int(q))
        next_id += 1
    return ClusterLabels(tuple(int(v) for v in labels))


def assess(person_boxes: Sequence[BoundingBox], params: DbscanParams = DbscanParams()) -> ViolationReport:
    """Cluster person centroids and split people into safe vs violators.

    Noise points are safe; every cluster member is a violator.  Edges join
    intra-cluster pairs whose centroid distance is <= eps.
    """
    cents = [centroid(b) for b in person_boxes]
    labels = dbscan(cents, params)
    safe = tuple(i for i, l in enumerate(labels.labels) if l == NOISE)
    clusters: List[Tuple[int, ...]] = [labels.members(c) for c in range(labels.n_clusters)]
    eps2 = params.eps * params.eps
    edges: List[Tuple[int, int]] = []
    for members in clusters:
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                dx = cents[i].x - cents[j].x
                dy = cents[i].y - cents[j].y
                if dx * dx + dy * dy <= eps2:
                    edges.append((i, j))
    return ViolationReport(safe, tuple(clusters), tuple(sorted(edges)))
