import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from langlattice.dynamics import DivergenceError, LatticeState, Stepper, build_system
from langlattice.experiments import standard_config
from langlattice.lattice import EdgeWeights, NodeAttributes, build_topology
from langlattice.stability import (
    PairwiseSystem,
    SingularSystemError,
    eigenvalues,
    fixed_point_delta,
    grid_sufficient_check,
    pairwise_iteration_matrix,
    pairwise_stable,
    scalar_condition,
    spectral_radius,
    stability_report,
)
from oracles import pairwise_difference_run

I2 = np.eye(2)


def matrices(n, lo=-2.0, hi=2.0):
    return st.lists(st.floats(lo, hi), min_size=n * n, max_size=n * n).map(
        lambda v: np.array(v).reshape(n, n))


# -- iteration matrix and spectral radius ------------------------------------

def test_iteration_matrix_examples():
    assert np.allclose(pairwise_iteration_matrix(PairwiseSystem(0.2, 1, 1, I2)), np.diag([0.6, 0.6]),
                       rtol=0, atol=1e-15)
    A = np.array([[0.3, -1.0], [2.0, 0.5]])
    assert np.array_equal(pairwise_iteration_matrix(PairwiseSystem(0.0, 3, 1, A)), I2)
    A = np.array([[1.0, 0.5], [0.0, 1.0]])
    assert np.array_equal(pairwise_iteration_matrix(PairwiseSystem(0.5, 1, 1, A)), [[0, -0.5], [0, 0]])


def test_spectral_radius_examples():
    assert spectral_radius(np.diag([0.6, 0.6])) == 0.6
    M = np.eye(2) - 0.33 * (3 + 1) * np.eye(2)
    assert abs(spectral_radius(M) - 0.32) < 1e-12
    assert spectral_radius(np.array([[0.0, -0.5], [0.0, 0.0]])) == 0.0


def test_spectral_radius_complex_pair():
    # rotation by 90 degrees scaled by 0.9
    assert abs(spectral_radius([[0, -0.9], [0.9, 0]]) - 0.9) < 1e-15


def test_spectral_radius_scalar_3x3_is_exact():
    assert spectral_radius(-0.32 * np.eye(3)) == pytest.approx(0.32, abs=1e-15)
    assert spectral_radius(0.6 * np.eye(3)) == pytest.approx(0.6, abs=1e-15)


def test_spectral_radius_rejects_non_square():
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((2, 3)))


@settings(max_examples=300)
@given(st.sampled_from([1, 2, 3]).flatmap(matrices))
def test_closed_form_matches_numpy(M):
    ref = np.max(np.abs(np.linalg.eigvals(M)))
    # root conditioning: near-defective matrices can't be resolved by either route
    ev, vec = np.linalg.eig(M)
    cond = np.linalg.cond(vec)
    assume(cond < 1e3)
    assert abs(spectral_radius(M) - ref) <= 1e-9


@settings(max_examples=200)
@given(st.sampled_from([2, 3, 4, 5]).flatmap(matrices))
def test_transpose_invariance(M):
    ev, vec = np.linalg.eig(M)
    assume(np.linalg.cond(vec) < 1e3)
    assert abs(spectral_radius(M) - spectral_radius(M.T)) <= 1e-9


def test_eigenvalues_four_by_four_uses_numeric_route():
    M = np.diag([0.1, -0.7, 0.3, 0.5]) + np.triu(np.ones((4, 4)), 1)
    M[3, 0] = 0.01  # not triangular
    assert spectral_radius(M) == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), abs=1e-12)
    assert len(eigenvalues(M)) == 4


# -- pairwise verdicts ----------------------------------------------------------

def test_pairwise_examples():
    v = pairwise_stable(PairwiseSystem(0.2, 1, 1))
    assert v.stable and v.rho == pytest.approx(0.6, abs=1e-15)
    v = pairwise_stable(PairwiseSystem(1.5, 1, 1))
    assert not v.stable and v.rho == pytest.approx(2.0, abs=1e-15)
    v = pairwise_stable(PairwiseSystem(0.33, 3, 3))
    assert v.stable and v.rho == pytest.approx(0.98, abs=1e-12)


def test_pairwise_boundary_is_unstable():
    # gain 2 gives M = -I, rho exactly 1
    assert not pairwise_stable(PairwiseSystem(1.0, 1, 1)).stable


def test_scalar_condition_examples():
    assert scalar_condition(PairwiseSystem(0.2, 1, 1))
    gap = PairwiseSystem(0.33, 3, 1)
    assert not scalar_condition(gap)
    assert pairwise_stable(gap).stable
    assert scalar_condition(PairwiseSystem(1e-12, 3, 3))


def test_scalar_condition_rejects_general_coupling():
    with pytest.raises(ValueError):
        scalar_condition(PairwiseSystem(0.1, 1, 1, np.array([[1, 0.1], [0, 1]])))


@given(st.floats(1e-6, 2.0), st.floats(0.01, 3), st.floats(0.01, 3))
def test_scalar_condition_implies_pairwise_stable(w, ai, aj):
    ps = PairwiseSystem(w, ai, aj)
    if scalar_condition(ps):
        assert pairwise_stable(ps).stable


@given(st.floats(1e-6, 2.0), st.floats(0.01, 3), st.floats(0.01, 3))
def test_identity_coupling_exact_condition(w, ai, aj):
    gain = w * (ai + aj)
    assume(abs(gain - 2.0) > 1e-9)
    assert pairwise_stable(PairwiseSystem(w, ai, aj)).stable == (0 < gain < 2)


# -- fixed point ------------------------------------------------------------------

def test_fixed_point_examples():
    assert np.array_equal(fixed_point_delta(PairwiseSystem(0.5, 1, 1), [0, 0]), [0, 0])
    assert np.allclose(fixed_point_delta(PairwiseSystem(0.5, 1, 1), [0.1, -0.2]), [0.1, -0.2],
                       rtol=0, atol=1e-15)


def test_fixed_point_singular():
    with pytest.raises(SingularSystemError):
        fixed_point_delta(PairwiseSystem(0.0, 1, 1), [0.1, 0.1])
    with pytest.raises(SingularSystemError):
        fixed_point_delta(PairwiseSystem(0.2, 1, 1, np.array([[1.0, 2.0], [0.5, 1.0]])), [0.1, 0.1])


@settings(max_examples=50, deadline=None)
@given(matrices(2, -0.3, 0.3), st.floats(0.01, 0.3), st.floats(0.5, 3), st.floats(0.5, 3),
       st.integers(0, 2**31))
def test_fixed_point_residual_and_convergence(P, w, ai, aj, seed):
    A = np.eye(2) + P
    ps = PairwiseSystem(w, ai, aj, A)
    rho = pairwise_stable(ps).rho
    assume(rho < 0.99)
    rng = np.random.default_rng(seed)
    dd = rng.uniform(-0.1, 0.1, 2)
    star = fixed_point_delta(ps, dd)
    assert np.max(np.abs(ps.gain * A @ star - dd)) < 1e-10
    diff, _ = pairwise_difference_run(pairwise_iteration_matrix(ps), dd, rng.uniform(-2, 2, 2), 10_000)
    assert np.linalg.norm(diff - star) < 1e-6


def test_two_node_simulation_converges_to_fixed_point():
    # production stepper on a 1x2 grid: node difference settles at the fixed point
    topo = build_topology(1, 2)
    d = np.array([[0.01, 0.05], [0.04, -0.01]])
    attrs = NodeAttributes(np.array([1.0, 3.0]), d)
    w = EdgeWeights(topo, [0.2])
    out = Stepper(topo, attrs, w, I2, math.inf).advance(LatticeState(0, [[0, 0], [1.5, -0.5]]), 10_000)
    star = fixed_point_delta(PairwiseSystem(0.2, 1, 3), d[1] - d[0])
    assert np.max(np.abs((out.x[1] - out.x[0]) - star)) < 1e-6


# -- grid checks ------------------------------------------------------------------

def uniform_system(rows, cols, w, a=1.0):
    topo = build_topology(rows, cols)
    weights = EdgeWeights(topo, np.full(len(topo.edges), w))
    attrs = NodeAttributes(np.full(topo.n_nodes, a), np.zeros((topo.n_nodes, 2)))
    return topo, weights, attrs


def test_row_sum_interior_node():
    topo, weights, attrs = uniform_system(3, 3, 0.2)
    check = grid_sufficient_check(topo, weights, attrs)
    assert check.sums[topo.index(2, 2)] == pytest.approx(0.8, abs=1e-15)
    assert check.contractive


def test_row_sum_isolated_node():
    topo, weights, attrs = uniform_system(1, 1, 0.2)
    check = grid_sufficient_check(topo, weights, attrs)
    assert check.sums.tolist() == [0.0] and check.contractive


def test_row_sum_flags_node_between_two_high_nodes():
    topo = build_topology(1, 3)
    weights = EdgeWeights(topo, [0.33, 0.33])
    attrs = NodeAttributes(np.array([3.0, 1.0, 3.0]), np.zeros((3, 2)))
    check = grid_sufficient_check(topo, weights, attrs)
    assert check.sums[1] == pytest.approx(1.98)
    assert not check.contractive


def global_update_matrix(topo, weights, attrs):
    """Dense ungated identity-coupling update matrix, built edge by edge."""
    n = topo.n_nodes
    G = np.eye(n)
    for (u, v), w in zip(topo.edges, weights.values):
        for s, t in ((u, v), (v, u)):
            G[s, t] += w * attrs.weights[t]
            G[s, s] -= w * attrs.weights[t]
    return G


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_contractive_rows_keep_differences_bounded(seed):
    rng = np.random.default_rng(seed)
    topo = build_topology(5, 5)
    weights = EdgeWeights(topo, rng.uniform(0, 0.25, len(topo.edges)))
    attrs = NodeAttributes(np.ones(25), np.zeros((25, 2)))
    assert grid_sufficient_check(topo, weights, attrs).contractive
    st_ = Stepper(topo, attrs, weights, I2, math.inf)
    cur = LatticeState(0, rng.uniform(-5, 5, (25, 2)))
    prev = np.inf
    for _ in range(100):
        spread = np.max(np.ptp(cur.x, axis=0))
        assert spread <= prev + 1e-12
        prev = spread
        cur = st_.advance(cur, 1)


@pytest.mark.parametrize("seed", range(5))
def test_tiny_grid_global_spectrum(seed):
    # brute-force global check on 3x3: simulation equals matrix powers, and
    # contractive rows give a row-stochastic matrix with spectral radius 1
    rng = np.random.default_rng(seed)
    topo = build_topology(3, 3)
    weights = EdgeWeights(topo, rng.uniform(0, 0.25, len(topo.edges)))
    d = rng.uniform(-0.02, 0.08, (9, 2))
    attrs = NodeAttributes(np.ones(9), d)
    G = global_update_matrix(topo, weights, attrs)
    assert np.all(G >= 0) and np.allclose(G.sum(axis=1), 1)
    assert np.max(np.abs(np.linalg.eigvals(G))) == pytest.approx(1.0, abs=1e-12)
    x = rng.uniform(0, 2, (9, 2))
    ref = x.copy()
    for _ in range(50):
        ref = G @ ref + d
    out = Stepper(topo, attrs, weights, I2, math.inf).advance(LatticeState(0, x), 50)
    assert np.max(np.abs(out.x - ref)) < 1e-12


def test_pairwise_stability_is_not_sufficient_for_the_grid():
    # line (3)-(1)-(3) with w = 0.3: every edge has rho 0.2, but the middle
    # node's row sum is 1.8 and the global update has eigenvalue -1.1
    topo = build_topology(1, 3)
    weights = EdgeWeights(topo, [0.3, 0.3])
    attrs = NodeAttributes(np.array([3.0, 1.0, 3.0]), np.zeros((3, 2)))
    for (u, v), w in zip(topo.edges, weights.values):
        assert pairwise_stable(PairwiseSystem(w, attrs.weights[u], attrs.weights[v])).rho == pytest.approx(0.2)
    ev = np.sort(np.linalg.eigvals(global_update_matrix(topo, weights, attrs)).real)
    assert ev == pytest.approx([-1.1, 0.7, 1.0])
    with pytest.raises(DivergenceError):
        Stepper(topo, attrs, weights, I2, math.inf).advance(LatticeState(0, [[0, 0], [1, 0], [0, 0]]), 1000)


# -- reports ----------------------------------------------------------------------

def test_standard_report_all_edges_stable():
    rep = stability_report(standard_config(7))
    assert len(rep.edges) == 760 and len(rep.nodes) == 400
    assert rep.all_pairwise_stable
    assert max(e["rho"] for e in rep.edges) < 1
    assert len({tuple(map(tuple, e["nodes"])) for e in rep.edges}) == 760


def test_low_weight_report_passes_both_checks():
    cfg = standard_config(2).with_(edge_weight_range=(0.0, 0.1), high_positions=())
    rep = stability_report(cfg)
    assert rep.all_pairwise_stable and rep.all_rows_contractive
    assert max(n["row_sum"] for n in rep.nodes) < 0.4


def test_report_flags_heavy_edge():
    cfg = standard_config(0).with_(rows=1, cols=2, high_positions=(), edge_weight_range=(2.5, 2.5 + 1e-12))
    rep = stability_report(cfg)
    assert not rep.all_pairwise_stable
    (edge,) = rep.unstable_edges()
    assert edge["rho"] == pytest.approx(4.0, abs=1e-9)
    assert "[1, 1]-[1, 2]" in rep.describe_failures()


def test_report_counts_scalar_disagreements():
    cfg = standard_config(7)
    rep = stability_report(cfg)
    expected = sum(1 for e in rep.edges if e["scalar_condition"] != e["stable"])
    assert rep.scalar_disagreements == expected
    # disagreements can only be "scalar test fails, exact test passes"
    assert all(e["stable"] for e in rep.edges if not e["scalar_condition"])


def test_report_with_general_coupling_has_no_row_verdict():
    cfg = standard_config(1).with_(rows=3, cols=3, high_positions=(), coupling=((1.0, 0.2), (0.0, 1.0)))
    rep = stability_report(cfg, system=build_system(cfg))
    assert rep.all_rows_contractive is None
    assert len(rep.nodes) == 9 and all(n["contractive"] is None for n in rep.nodes)
    assert "scalar_condition" not in rep.edges[0]
