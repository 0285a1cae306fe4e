"""Post-processing of lattice snapshots: colors, extents, clusters, coherence."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1
DEFAULT_EPS = 0.25
DEFAULT_MIN_PTS = 4


class DegenerateLabelingError(ValueError):
    pass


@dataclass(frozen=True)
class ColorTriple:
    r: float
    g: float
    b: float

    def as_tuple(self):
        return (self.r, self.g, self.b)


def color_of(i: int, j: int, rows: int, cols: int) -> ColorTriple:
    """Fixed color of node (i, j): index fractions of the grid size."""
    if not (1 <= i <= rows and 1 <= j <= cols):
        raise ValueError(f"node ({i}, {j}) outside {rows}x{cols} grid")
    return ColorTriple(i / rows, j / cols, (i + j) / (rows + cols))


def node_colors(topology) -> np.ndarray:
    """``(N, 3)`` colors in storage order."""
    return np.array([color_of(i, j, topology.rows, topology.cols).as_tuple()
                     for i, j in topology.nodes()])


def _points(snapshot) -> np.ndarray:
    x = snapshot.x if hasattr(snapshot, "x") else snapshot
    return np.asarray(x, dtype=float)


def bounding_box(snapshot) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis ``(max - min, (max + min) / 2)`` over all state points."""
    x = _points(snapshot)
    if x.size == 0:
        raise ValueError("empty snapshot")
    lo, hi = x.min(axis=0), x.max(axis=0)
    return hi - lo, (hi + lo) / 2


def cluster(snapshot, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS) -> np.ndarray:
    """DBSCAN labels; ``NOISE`` (-1) marks unclustered points.

    A point is core when at least ``min_pts`` points (itself included) lie
    within Euclidean distance ``eps``. Border points join the cluster of
    their nearest core point, so the partition does not depend on input
    order. Labels are numbered by first core point in storage order.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    x = _points(snapshot)
    n = len(x)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(x)
    hoods = tree.query_ball_point(x, r=eps)
    core = np.array([len(h) >= min_pts for h in hoods])

    next_label = 0
    for start in range(n):
        if not core[start] or labels[start] != NOISE:
            continue
        labels[start] = next_label
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in hoods[u]:
                if core[v] and labels[v] == NOISE:
                    labels[v] = next_label
                    queue.append(v)
        next_label += 1

    for u in np.flatnonzero(~core):
        cores = [v for v in hoods[u] if core[v]]
        if cores:
            d = np.linalg.norm(x[cores] - x[u], axis=1)
            labels[u] = labels[cores[int(np.argmin(d))]]
    return labels


def _pair_distance_sum(coords: np.ndarray) -> float:
    """Sum of Manhattan distances over all unordered pairs, via sorted axes."""
    n = len(coords)
    if n < 2:
        return 0.0
    ranks = 2 * np.arange(n) - n + 1
    return float(sum(np.dot(np.sort(coords[:, ax]), ranks) for ax in range(coords.shape[1])))


def coherence(labels, topology) -> float:
    """Mean within-cluster grid distance over mean all-pairs grid distance.

    Both means are over pairs of non-noise nodes, using Manhattan distance on
    (i, j). Values well below 1 mean clusters follow the geography.
    """
    labels = np.asarray(labels)
    coords = topology.coords.astype(float)
    keep = labels != NOISE
    ids, counts = np.unique(labels[keep], return_counts=True)
    if not np.any(counts >= 2):
        raise DegenerateLabelingError("coherence needs a cluster with at least two members")
    within_sum = sum(_pair_distance_sum(coords[labels == c]) for c in ids)
    within_pairs = float(sum(c * (c - 1) // 2 for c in counts))
    m = int(keep.sum())
    all_mean = _pair_distance_sum(coords[keep]) / (m * (m - 1) / 2)
    if all_mean == 0:
        raise DegenerateLabelingError("all clustered nodes share one grid position")
    return (within_sum / within_pairs) / all_mean


def cluster_anchors(labels, topology, anchors) -> dict[int, int]:
    """For each cluster, the anchor (index into ``anchors``) nearest, by grid
    Manhattan distance, to the majority of its members."""
    labels = np.asarray(labels)
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    coords = topology.coords.astype(float)
    nearest = np.abs(coords[:, None, :] - anchors[None, :, :]).sum(-1).argmin(axis=1)
    out = {}
    for c in np.unique(labels[labels != NOISE]):
        out[int(c)] = int(np.bincount(nearest[labels == c], minlength=len(anchors)).argmax())
    return out


@dataclass(frozen=True, eq=False)
class ClusterReport:
    labels: np.ndarray
    n_clusters: int
    sizes: list
    centroids: list
    noise_fraction: float
    coherence: float | None
    extent: list
    center: list
    eps: float
    min_pts: int
    step: int | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "eps": self.eps,
            "min_pts": self.min_pts,
            # defaults are calibrated stand-ins, not a published cluster criterion
            "calibrated_defaults": True,
            "n_clusters": self.n_clusters,
            "noise_fraction": self.noise_fraction,
            "coherence": self.coherence,
            "sizes": self.sizes,
            "centroids": self.centroids,
            "extent": self.extent,
            "center": self.center,
            "labels": [int(v) for v in self.labels],
            "provenance": self.provenance,
        }


def analyze_snapshot(snapshot, topology, eps=DEFAULT_EPS, min_pts=DEFAULT_MIN_PTS,
                     provenance=None) -> ClusterReport:
    x = _points(snapshot)
    extent, center = bounding_box(x)
    labels = cluster(x, eps, min_pts)
    ids = [c for c in np.unique(labels) if c != NOISE]
    return ClusterReport(
        labels=labels,
        n_clusters=len(ids),
        sizes=[int((labels == c).sum()) for c in ids],
        centroids=[x[labels == c].mean(axis=0).tolist() for c in ids],
        noise_fraction=float(np.mean(labels == NOISE)),
        coherence=coherence(labels, topology),
        extent=extent.tolist(),
        center=center.tolist(),
        eps=float(eps),
        min_pts=int(min_pts),
        step=getattr(snapshot, "step", None),
        provenance=dict(provenance or {}),
    )


def analyze(trajectory, topology, eps=DEFAULT_EPS, min_pts=DEFAULT_MIN_PTS) -> ClusterReport:
    """Cluster report for the final snapshot of a trajectory."""
    if trajectory is None or len(trajectory) == 0:
        raise ValueError("empty trajectory")
    return analyze_snapshot(trajectory.final, topology, eps, min_pts, trajectory.provenance)
