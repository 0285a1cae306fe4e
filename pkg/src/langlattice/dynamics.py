"""Synchronous threshold-gated lattice dynamics.

Every node advances as::

    x_i(k+1) = x_i(k) + d_i + A @ sum_{m in N_i} w_im * a_m * gate(x_m(k) - x_i(k))

where ``gate`` zeroes any difference whose infinity norm exceeds the
threshold. All differences are read from the step-k state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .config import SimulationConfig, validate
from .lattice import (
    EdgeWeights,
    GridTopology,
    NodeAttributes,
    assign_node_attributes,
    build_topology,
    sample_edge_weights,
    substream,
    uniform_open,
)

DIVERGENCE_LIMIT = 1e9


class DivergenceError(RuntimeError):
    """State became non-finite or exceeded the divergence limit."""

    def __init__(self, step: int, node: tuple[int, int], value: float):
        self.step, self.node, self.value = step, node, value
        super().__init__(
            f"state diverged at step {step}, node {node} (entry {value!r}); "
            "the configuration is likely unstable"
        )


class UnstableConfigError(ValueError):
    """Raised by strict-mode runs whose stability pre-check fails."""


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LatticeState:
    step: int
    x: np.ndarray  # (N, p) in row-major node order

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"state must be (nodes, dim), got shape {x.shape}")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        if self.step < 0:
            raise ValueError("step must be nonnegative")

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, LatticeState)
            and self.step == other.step
            and np.array_equal(self.x, other.x)
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    snapshots: tuple[LatticeState, ...]
    provenance: dict = field(default_factory=dict)

    @property
    def final(self) -> LatticeState:
        return self.snapshots[-1]

    @property
    def initial(self) -> LatticeState:
        return self.snapshots[0]

    def steps(self) -> list[int]:
        return [s.step for s in self.snapshots]

    def __len__(self):
        return len(self.snapshots)

    def __eq__(self, other):
        return (
            isinstance(other, Trajectory)
            and self.provenance == other.provenance
            and len(self) == len(other)
            and all(a == b for a, b in zip(self.snapshots, other.snapshots))
        )


def delta(x_other, x_self) -> np.ndarray:
    """Difference of a neighbour state from a node's own state."""
    a = np.asarray(x_other, dtype=float)
    b = np.asarray(x_self, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a - b


def gate(diff, threshold: float) -> np.ndarray:
    """Zero the difference when its infinity norm strictly exceeds ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    diff = np.asarray(diff, dtype=float)
    if diff.size and np.max(np.abs(diff)) > threshold:
        return np.zeros_like(diff)
    return diff.copy()


@numba.njit(cache=True)
def _advance(x, offsets, nbr, coef, A, use_A, threshold, steps, limit):
    n, p = x.shape
    cur = x.copy()
    nxt = np.empty_like(cur)
    acc = np.empty(p)
    for k in range(steps):
        for i in range(n):
            for c in range(p):
                acc[c] = 0.0
            for e in range(nbr.shape[1]):
                j = nbr[i, e]
                if j < 0:
                    continue
                gap = 0.0
                for c in range(p):
                    v = abs(cur[j, c] - cur[i, c])
                    if v > gap:
                        gap = v
                if gap > threshold:
                    continue
                for c in range(p):
                    acc[c] += coef[i, e] * (cur[j, c] - cur[i, c])
            for c in range(p):
                if use_A:
                    s = 0.0
                    for r in range(p):
                        s += A[c, r] * acc[r]
                else:
                    s = acc[c]
                v = cur[i, c] + offsets[i, c] + s
                nxt[i, c] = v
                if not abs(v) <= limit:
                    return nxt, k, i, v
        tmp = cur
        cur = nxt
        nxt = tmp
    return cur, -1, -1, 0.0


class Stepper:
    """Precomputed coupling tables for repeated stepping of one system."""

    def __init__(self, topology: GridTopology, attrs: NodeAttributes, weights: EdgeWeights,
                 coupling, threshold: float):
        A = np.asarray(coupling, dtype=float)
        p = attrs.dim
        if A.shape != (p, p):
            raise ValueError(f"coupling matrix must be {p}x{p}, got {A.shape}")
        if attrs.offsets.shape[0] != topology.n_nodes:
            raise ValueError("attributes do not match topology size")
        if weights.topology != topology:
            raise ValueError("edge weights belong to a different topology")
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        self.topology = topology
        self.nbr = np.ascontiguousarray(topology.neighbor_table)
        w = weights.neighbor_weights()
        a_nbr = np.where(self.nbr >= 0, attrs.weights[np.maximum(self.nbr, 0)], 0.0)
        self.coef = np.ascontiguousarray(w * a_nbr)
        self.offsets = np.ascontiguousarray(attrs.offsets)
        self.A = np.ascontiguousarray(A)
        self.use_A = not np.array_equal(A, np.eye(p))
        self.threshold = float(threshold)

    def advance(self, state: LatticeState, steps: int) -> LatticeState:
        if state.x.shape != self.offsets.shape:
            raise ValueError(f"state shape {state.x.shape} does not match offsets {self.offsets.shape}")
        x = np.ascontiguousarray(state.x)
        out, bad_k, bad_i, bad_v = _advance(
            x, self.offsets, self.nbr, self.coef, self.A, self.use_A,
            self.threshold, int(steps), DIVERGENCE_LIMIT,
        )
        if bad_k >= 0:
            raise DivergenceError(state.step + bad_k + 1, self.topology.label(bad_i), float(bad_v))
        return LatticeState(state.step + int(steps), out)


def step(state: LatticeState, topology: GridTopology, attrs: NodeAttributes,
         weights: EdgeWeights, coupling, threshold: float) -> LatticeState:
    """One synchronous update of every node."""
    return Stepper(topology, attrs, weights, coupling, threshold).advance(state, 1)


def simulate(state: LatticeState, stepper: Stepper, steps: int, snapshot_every: int,
             provenance: dict | None = None) -> Trajectory:
    """Advance ``steps`` updates, keeping the initial state, every
    ``snapshot_every``-th step and the final step."""
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    snaps = [state]
    cur = state
    done = 0
    while done < steps:
        chunk = min(snapshot_every, steps - done)
        cur = stepper.advance(cur, chunk)
        done += chunk
        snaps.append(cur)
    return Trajectory(tuple(snaps), dict(provenance or {}))


@dataclass(frozen=True, eq=False)
class System:
    """Everything sampled from a config: topology, attributes, weights, initial state."""

    config: SimulationConfig
    topology: GridTopology
    attrs: NodeAttributes
    weights: EdgeWeights
    initial: LatticeState


def build_system(config: SimulationConfig) -> System:
    """Sample all random fields, each from its own named substream."""
    cfg = validate(config)
    topo = build_topology(cfg.rows, cfg.cols)
    weights = sample_edge_weights(topo, cfg.edge_weight_range, substream(cfg.seed, "edge_weights"))
    attrs = assign_node_attributes(
        topo, cfg.high_positions, cfg.high_weight, cfg.low_weight, cfg.offset_range,
        cfg.dim, substream(cfg.seed, "offsets"), offset_scale=cfg.offset_scale,
    )
    x0 = uniform_open(substream(cfg.seed, "states"), cfg.state_init_range, (topo.n_nodes, cfg.dim))
    return System(cfg, topo, attrs, weights, LatticeState(0, x0))


def run(config: SimulationConfig, system: System | None = None) -> Trajectory:
    """Deterministic trajectory for ``config``.

    A failing pairwise stability pre-check warns, or raises
    :class:`UnstableConfigError` when ``strict_stability`` is set.
    """
    from .stability import stability_report

    system = system or build_system(config)
    report = stability_report(config, system=system)
    if not report.all_pairwise_stable:
        msg = "pairwise stability check failed: " + report.describe_failures()
        if config.strict_stability:
            raise UnstableConfigError(msg)
        warnings.warn(msg, StabilityWarning, stacklevel=2)
    stepper = Stepper(system.topology, system.attrs, system.weights,
                      config.coupling_matrix, config.threshold)
    prov = {"config_hash": config.digest(), "seed": int(config.seed)}
    return simulate(system.initial, stepper, config.steps, config.snapshot_every, prov)
