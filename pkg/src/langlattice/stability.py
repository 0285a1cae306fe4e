"""Pairwise spectral-radius stability tests and the grid-wide row-sum check.

For an edge with weight ``w`` between nodes of influence ``a_i`` and ``a_j``
the difference of the two states evolves as::

    diff(k+1) = (I - w (a_i + a_j) A) diff(k) + (d_j - d_i)

which is asymptotically stable iff the spectral radius of the iteration
matrix is below one.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class PairwiseSystem:
    w: float
    a_i: float
    a_j: float
    coupling: np.ndarray | None = None  # identity when None

    def matrix_A(self, dim: int | None = None) -> np.ndarray:
        if self.coupling is None:
            return np.eye(dim or 2)
        return np.asarray(self.coupling, dtype=float)

    @property
    def gain(self) -> float:
        return self.w * (self.a_i + self.a_j)


def pairwise_iteration_matrix(sys: PairwiseSystem, dim: int | None = None) -> np.ndarray:
    A = sys.matrix_A(dim)
    return np.eye(A.shape[0]) - sys.gain * A


def _eig2(m):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    half_tr = 0.5 * (a + d)
    # (a-d)^2 + 4bc instead of tr^2 - 4det: exact zero for scalar matrices
    disc = 0.25 * (a - d) ** 2 + b * c
    r = cmath.sqrt(disc)
    return [half_tr + r, half_tr - r]


_CLUSTER_TOL = 1e-4


def _eig3(m):
    shift = np.trace(m) / 3.0
    B = m - shift * np.eye(3)
    # characteristic polynomial of traceless B: t^3 + P t + Q
    P = -0.5 * float(np.trace(B @ B))
    Q = -(B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
          - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
          + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0]))
    if P == 0.0 and Q == 0.0:
        return [complex(shift)] * 3
    D = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    if D <= 0.0:
        # three real roots, trigonometric form
        rad = 2.0 * math.sqrt(-P / 3.0)
        arg = 3.0 * Q / (P * rad) if P != 0.0 else 0.0
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [rad * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        sq = math.sqrt(D)
        u = math.copysign(abs(-Q / 2.0 + sq) ** (1 / 3), -Q / 2.0 + sq)
        v = math.copysign(abs(-Q / 2.0 - sq) ** (1 / 3), -Q / 2.0 - sq)
        roots = [u + v]
    roots = [_polish(t, P, Q) for t in roots]
    if len(roots) == 1:
        t = roots[0]
        # deflate: t^3 + P t + Q = (s - t)(s^2 + t s + t^2 + P)
        half = -t / 2.0
        r = cmath.sqrt(half * half - (t * t + P))
        roots += [half + r, half - r]
    # a (near-)double root is only fixed to ~sqrt(eps) by the polynomial
    # coefficients; hand clustered spectra to QR, which works on the matrix
    scale = max(abs(t) for t in roots) or 1.0
    gaps = [abs(roots[a] - roots[b]) for a, b in ((0, 1), (0, 2), (1, 2))]
    if min(gaps) < _CLUSTER_TOL * scale:
        return [complex(v) for v in np.linalg.eigvals(m)]
    return [complex(t) + shift for t in roots]


def _polish(t, P, Q, iters=3):
    for _ in range(iters):
        f = t * t * t + P * t + Q
        fp = 3.0 * t * t + P
        if fp == 0.0:
            break
        nt = t - f / fp
        if abs(nt * nt * nt + P * nt + Q) >= abs(f):
            break
        t = nt
    return t


def eigenvalues(M) -> list[complex]:
    """Eigenvalues of a square matrix; closed form for sizes up to 3."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    n = M.shape[0]
    if n == 0:
        return []
    if n == 1:
        return [complex(M[0, 0])]
    if np.array_equal(M, np.triu(M)) or np.array_equal(M, np.tril(M)):
        return [complex(v) for v in np.diag(M)]
    if n == 2:
        return _eig2(M)
    if n == 3:
        return _eig3(M)
    return [complex(v) for v in np.linalg.eigvals(M)]


def spectral_radius(M) -> float:
    ev = eigenvalues(M)
    return max((abs(v) for v in ev), default=0.0)


@dataclass(frozen=True)
class PairwiseVerdict:
    stable: bool
    rho: float


def pairwise_stable(sys: PairwiseSystem, dim: int | None = None) -> PairwiseVerdict:
    rho = spectral_radius(pairwise_iteration_matrix(sys, dim))
    return PairwiseVerdict(rho < 1.0, rho)


def scalar_condition(sys: PairwiseSystem) -> bool:
    """The simplified identity-coupling test ``w (a_i + a_j) < 1``.

    Conservative: the exact identity-coupling condition is ``0 < gain < 2``.
    """
    if sys.coupling is not None:
        A = np.asarray(sys.coupling, dtype=float)
        if not np.array_equal(A, np.eye(A.shape[0])):
            raise ValueError("scalar condition only applies to identity coupling")
    return sys.gain < 1.0


def fixed_point_delta(sys: PairwiseSystem, offset_diff) -> np.ndarray:
    """Steady-state difference solving ``w (a_i + a_j) A diff = offset_diff``."""
    dd = np.asarray(offset_diff, dtype=float)
    K = sys.gain * sys.matrix_A(dd.shape[0])
    if K.shape != (dd.shape[0], dd.shape[0]):
        raise ValueError("offset difference does not match coupling size")
    try:
        if not np.all(np.isfinite(K)) or np.linalg.cond(K) > 1e14:
            raise np.linalg.LinAlgError
        return np.linalg.solve(K, dd)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            f"coupling gain {sys.gain:g} times A is singular; the pair may be unstable"
        ) from None


@dataclass(frozen=True)
class RowSumCheck:
    sums: np.ndarray  # (N,) per-node sum of w * a_neighbour
    contractive: bool

    @property
    def max_sum(self) -> float:
        return float(self.sums.max()) if self.sums.size else 0.0


def grid_sufficient_check(topology, weights, attrs) -> RowSumCheck:
    """Per-node ``sum_j w_ij a_j``; all below one keeps the ungated update a
    nonnegative row-stochastic averaging (identity coupling only)."""
    nbr = topology.neighbor_table
    w = weights.neighbor_weights()
    a = np.where(nbr >= 0, attrs.weights[np.maximum(nbr, 0)], 0.0)
    sums = (w * a).sum(axis=1)
    return RowSumCheck(sums, bool(np.all(sums < 1.0)))


@dataclass(frozen=True, eq=False)
class StabilityReport:
    edges: list  # one dict per edge: nodes, w, gain, rho, stable, scalar_condition
    nodes: list  # one dict per node: node, row_sum, contractive
    all_pairwise_stable: bool
    all_rows_contractive: bool | None  # None when coupling is not the identity
    scalar_disagreements: int

    @property
    def stable(self) -> bool:
        return self.all_pairwise_stable

    def unstable_edges(self) -> list:
        return [e for e in self.edges if not e["stable"]]

    def describe_failures(self) -> str:
        bad = self.unstable_edges()
        parts = [f"edge {e['nodes'][0]}-{e['nodes'][1]} rho={e['rho']:.6g}" for e in bad[:5]]
        more = f" (+{len(bad) - 5} more)" if len(bad) > 5 else ""
        return "; ".join(parts) + more

    def summary(self) -> dict:
        rhos = [e["rho"] for e in self.edges]
        sums = [n["row_sum"] for n in self.nodes]
        return {
            "all_pairwise_stable": self.all_pairwise_stable,
            "all_rows_contractive": self.all_rows_contractive,
            "n_edges": len(self.edges),
            "n_nodes": len(self.nodes),
            "n_unstable_edges": len(self.unstable_edges()),
            "max_rho": max(rhos, default=0.0),
            "max_row_sum": max(sums, default=0.0),
            "scalar_condition_disagreements": self.scalar_disagreements,
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "edges": self.edges, "nodes": self.nodes}


def stability_report(config, system=None) -> StabilityReport:
    """Pairwise test on every edge plus the row-sum check on every node."""
    from .dynamics import build_system

    system = system or build_system(config)
    topo, attrs, weights = system.topology, system.attrs, system.weights
    A = config.coupling_matrix
    identity = config.coupling_is_identity
    edges = []
    disagreements = 0
    for (u, v), w in zip(topo.edges, weights.values):
        ps = PairwiseSystem(float(w), float(attrs.weights[u]), float(attrs.weights[v]),
                            None if identity else A)
        verdict = pairwise_stable(ps, config.dim)
        entry = {
            "nodes": [list(topo.label(int(u))), list(topo.label(int(v)))],
            "w": float(w),
            "gain": ps.gain,
            "rho": verdict.rho,
            "stable": verdict.stable,
        }
        if identity:
            sc = scalar_condition(ps)
            entry["scalar_condition"] = sc
            disagreements += sc != verdict.stable
        edges.append(entry)
    # row sums are listed for every node; the verdict only exists for identity coupling
    check = grid_sufficient_check(topo, weights, attrs)
    contractive = check.contractive if identity else None
    nodes = [
        {"node": list(topo.label(k)), "row_sum": float(s),
         "contractive": bool(s < 1.0) if identity else None}
        for k, s in enumerate(check.sums)
    ]
    return StabilityReport(
        edges=edges,
        nodes=nodes,
        all_pairwise_stable=all(e["stable"] for e in edges),
        all_rows_contractive=contractive,
        scalar_disagreements=int(disagreements),
    )
