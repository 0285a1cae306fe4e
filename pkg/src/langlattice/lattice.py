"""Grid topology, node/edge attributes and seeded random substreams.

Nodes carry 1-based dyadic labels ``(i, j)``; internally they are stored in
row-major order, so node ``(i, j)`` lives at flat index ``(i-1)*cols + (j-1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# fixed spawn keys so each field has its own stream regardless of the others
SUBSTREAMS = {"states": 0, "offsets": 1, "edge_weights": 2}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named field derived from the master seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(SUBSTREAMS[name],))
    return np.random.default_rng(ss)


def _check_interval(interval, what="range"):
    lo, hi = (float(v) for v in interval)
    if not lo < hi:
        raise ValueError(f"{what} must satisfy lower < upper, got ({lo}, {hi})")
    return lo, hi


def uniform_open(rng: np.random.Generator, interval, size) -> np.ndarray:
    """Uniform draws from the open interval ``(lo, hi)``."""
    lo, hi = _check_interval(interval)
    out = rng.uniform(lo, hi, size)
    # uniform() is half-open; redraw the measure-zero lower endpoint
    bad = out <= lo
    while bad.any():
        out[bad] = rng.uniform(lo, hi, int(bad.sum()))
        bad = out <= lo
    return out


@dataclass(frozen=True)
class GridTopology:
    """Bounded planar lattice with 4-neighbour adjacency and no wraparound."""

    rows: int
    cols: int

    def __post_init__(self):
        for name in ("rows", "cols"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def contains(self, i: int, j: int) -> bool:
        return 1 <= i <= self.rows and 1 <= j <= self.cols

    def index(self, i: int, j: int) -> int:
        if not self.contains(i, j):
            raise ValueError(f"node ({i}, {j}) outside {self.rows}x{self.cols} grid")
        return (i - 1) * self.cols + (j - 1)

    def label(self, idx: int) -> tuple[int, int]:
        return idx // self.cols + 1, idx % self.cols + 1

    def nodes(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(1, self.rows + 1) for j in range(1, self.cols + 1)]

    def neighbors(self, i: int, j: int) -> list[tuple[int, int]]:
        """Neighbourhood of ``(i, j)`` in up, left, right, down order."""
        self.index(i, j)
        cand = ((i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j))
        return [(m, n) for m, n in cand if self.contains(m, n)]

    @cached_property
    def edges(self) -> np.ndarray:
        """Unordered edges as ``(E, 2)`` flat indices, lower index first.

        Enumerated row-major; for each node the right edge precedes the down edge.
        """
        out = []
        for i in range(1, self.rows + 1):
            for j in range(1, self.cols + 1):
                u = self.index(i, j)
                if j < self.cols:
                    out.append((u, u + 1))
                if i < self.rows:
                    out.append((u, u + self.cols))
        arr = np.array(out, dtype=np.int64).reshape(-1, 2)
        arr.flags.writeable = False
        return arr

    @property
    def n_edges(self) -> int:
        return self.rows * (self.cols - 1) + self.cols * (self.rows - 1)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(N, 4)`` neighbour indices padded with -1, in :meth:`neighbors` order."""
        tab = -np.ones((self.n_nodes, 4), dtype=np.int64)
        for u, (i, j) in enumerate(self.nodes()):
            for e, (m, n) in enumerate(self.neighbors(i, j)):
                tab[u, e] = self.index(m, n)
        tab.flags.writeable = False
        return tab

    def degrees(self) -> np.ndarray:
        return (self.neighbor_table >= 0).sum(axis=1)

    @cached_property
    def coords(self) -> np.ndarray:
        """``(N, 2)`` array of 1-based ``(i, j)`` labels in storage order."""
        c = np.array(self.nodes(), dtype=np.int64).reshape(-1, 2)
        c.flags.writeable = False
        return c


def build_topology(rows: int, cols: int) -> GridTopology:
    return GridTopology(rows, cols)


@dataclass(frozen=True, eq=False)
class EdgeWeights:
    """Connectivity strength per unordered edge; symmetric because stored once."""

    topology: GridTopology
    values: np.ndarray  # aligned with topology.edges
    _lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.topology.edges),):
            raise ValueError(f"expected {len(self.topology.edges)} edge weights, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        lookup = {(int(u), int(v)): k for k, (u, v) in enumerate(self.topology.edges)}
        object.__setattr__(self, "_lookup", lookup)

    def __len__(self):
        return len(self.values)

    def weight(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Weight of the edge between labels ``a`` and ``b``, in either order."""
        u, v = sorted((self.topology.index(*a), self.topology.index(*b)))
        try:
            return float(self.values[self._lookup[(u, v)]])
        except KeyError:
            raise KeyError(f"{a} and {b} are not adjacent") from None

    def neighbor_weights(self) -> np.ndarray:
        """``(N, 4)`` weights aligned with ``topology.neighbor_table`` (0 on padding)."""
        tab = self.topology.neighbor_table
        out = np.zeros(tab.shape)
        for u in range(tab.shape[0]):
            for e in range(4):
                v = tab[u, e]
                if v >= 0:
                    out[u, e] = self.values[self._lookup[(min(u, v), max(u, v))]]
        return out


def sample_edge_weights(topology: GridTopology, interval, rng: np.random.Generator) -> EdgeWeights:
    lo, _ = _check_interval(interval, "edge weight range")
    if lo < 0:
        raise ValueError(f"edge weight range lower bound must be >= 0, got {lo}")
    return EdgeWeights(topology, uniform_open(rng, interval, len(topology.edges)))


@dataclass(frozen=True, eq=False)
class NodeAttributes:
    """Influence weight and constant drift vector for every node (storage order)."""

    weights: np.ndarray  # (N,)
    offsets: np.ndarray  # (N, p)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        d = np.array(self.offsets, dtype=float)
        if d.ndim != 2 or w.shape != (d.shape[0],):
            raise ValueError(f"inconsistent attribute shapes {w.shape} and {d.shape}")
        if np.any(w <= 0):
            raise ValueError("node weights must be positive")
        w.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offsets", d)

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]


def assign_node_attributes(
    topology: GridTopology,
    high_positions,
    high_weight: float,
    low_weight: float,
    offset_range,
    dim: int,
    rng: np.random.Generator,
    offset_scale: float = 1.0,
) -> NodeAttributes:
    """Two-level influence weights plus uniformly sampled offsets.

    ``offset_scale`` multiplies the sampled offsets after drawing, so scaled
    variants consume exactly the same random numbers as the base.
    """
    weights = np.full(topology.n_nodes, float(low_weight))
    for i, j in high_positions:
        if not topology.contains(i, j):
            raise ValueError(f"high-weight position ({i}, {j}) outside {topology.rows}x{topology.cols} grid")
        weights[topology.index(i, j)] = float(high_weight)
    offsets = uniform_open(rng, offset_range, (topology.n_nodes, int(dim))) * offset_scale
    return NodeAttributes(weights, offsets)
