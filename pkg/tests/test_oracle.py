import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from otflow import oracle
from otflow.graph_model import StructureMatrix
from otflow.oracle import (
    DenseTensor,
    LPInfeasibleError,
    OracleCapError,
    count_paths,
    dense_projection,
    enumerate_paths,
    random_tiny,
    simplex,
    solve_exact_lp,
    solve_node_edge_lp,
)
from otflow.problems import MultiCommodityProblem, SingleCommodityProblem


# ---------------------------------------------------------------- dense projections

def test_projection_all_ones_marginal():
    assert np.array_equal(dense_projection(np.ones((2, 2, 2)), 1), [4.0, 4.0])


def test_projection_all_ones_bimarginal():
    assert np.array_equal(dense_projection(np.ones((2, 2, 2)), (1, 2)), [[2.0, 2.0], [2.0, 2.0]])


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_projection_conserves_mass(seed, t, k):
    rng = np.random.default_rng(seed)
    A = rng.random((2, 3, 4, 2))
    assert dense_projection(A, t).sum() == pytest.approx(A.sum(), rel=1e-12)
    pair = (t, k % 4 + 1) if k % 4 + 1 != t else (t,)
    assert dense_projection(A, pair).sum() == pytest.approx(A.sum(), rel=1e-12)


def test_projection_respects_requested_order():
    A = np.random.default_rng(0).random((2, 3, 4))
    assert np.allclose(dense_projection(A, (3, 1)), A.sum(axis=1).T)


def test_commodity_axis():
    A = DenseTensor(np.random.default_rng(1).random((3, 2, 2)), commodity_axis=True)
    assert np.allclose(dense_projection(A, (0, 2)), A.values.sum(axis=1))
    assert np.allclose(dense_projection(A, 1), A.values.sum(axis=(0, 2)))


def test_tensor_cap():
    with pytest.raises(OracleCapError, match="exceeds"):
        oracle.check_tensor_size(3, 10, 7)


# ---------------------------------------------------------------- path enumeration

def _brute_paths(problem, commodity=0):
    """All state sequences with every transition on the support and both endpoints feasible."""
    src, snk = oracle._targets(problem, commodity)
    out = []
    for seq in itertools.product(range(problem.n), repeat=problem.T):
        if src[seq[0]] <= 0 or snk[seq[-1]] <= 0:
            continue
        if all((a, b) in problem.structure_at(t + 1).support() for t, (a, b) in enumerate(zip(seq, seq[1:]))):
            out.append(seq)
    return sorted(out)


@pytest.mark.parametrize("seed", range(6))
def test_enumerate_paths_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    p = random_tiny(rng, n=3, T=4, L=2, time_varying=seed % 2 == 1)
    for ell in range(p.L):
        ps = enumerate_paths(p, ell)
        brute = _brute_paths(p, ell)
        assert sorted(map(tuple, ps.paths.tolist())) == brute
        assert count_paths(p, ell) == len(brute)


def test_enumerate_paths_cap():
    p = random_tiny(np.random.default_rng(0), n=4, T=4, density=1.0)
    with pytest.raises(OracleCapError):
        enumerate_paths(p, cap=10)


def test_path_costs_single():
    # chain 0 -> 1 -> 2 with c = [1, 2, 3] and zero transition costs costs 6
    C = np.full((3, 3), np.inf)
    C[0, 1] = C[1, 2] = 0.0
    p = SingleCommodityProblem(StructureMatrix.from_dense(C), [1.0, 2.0, 3.0], [1, 0, 0], [0, 0, 1],
                               np.full((1, 3), 5.0), 3, 1.0)
    ps = enumerate_paths(p)
    assert ps.paths.tolist() == [[0, 1, 2]]
    assert ps.costs.tolist() == [6.0]


def test_path_costs_multi_skip_endpoints():
    # commodity costs count on the interior steps only
    C = np.full((2, 2), 0.5)
    C_L = np.array([[1.0, 10.0]])
    p = MultiCommodityProblem(StructureMatrix.from_dense(C), C_L, [[1, 0]], [[0, 1]], np.full((1, 2), 5.0), 3, 1.0)
    ps = enumerate_paths(p)
    costs = dict(zip(map(tuple, ps.paths.tolist()), ps.costs))
    assert costs[(0, 0, 1)] == pytest.approx(1.0 + 1.0)
    assert costs[(0, 1, 1)] == pytest.approx(1.0 + 10.0)


# ---------------------------------------------------------------- simplex

def _random_lp(rng, m_eq, m_ub, nv):
    x0 = rng.random(nv)
    A_eq = rng.random((m_eq, nv))
    A_ub = rng.random((m_ub, nv))
    return rng.random(nv), A_eq, A_eq @ x0, A_ub, A_ub @ x0 + rng.random(m_ub)


@pytest.mark.parametrize("seed", range(15))
def test_simplex_matches_highs(seed):
    rng = np.random.default_rng(seed)
    c, A_eq, b_eq, A_ub, b_ub = _random_lp(rng, int(rng.integers(1, 4)), int(rng.integers(0, 4)),
                                           int(rng.integers(4, 9)))
    ours = simplex(c, A_eq, b_eq, A_ub, b_ub)
    ref = linprog(c, A_ub=A_ub if len(A_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A_eq, b_eq=b_eq, method="highs")
    assert ref.status == 0
    assert ours.value == pytest.approx(ref.fun, abs=1e-9)
    assert np.all(ours.x >= -1e-12)
    assert np.allclose(A_eq @ ours.x, b_eq, atol=1e-9)
    if len(A_ub):
        assert np.all(A_ub @ ours.x <= b_ub + 1e-9)


def test_simplex_redundant_rows():
    A_eq = np.array([[1.0, 1.0], [2.0, 2.0]])
    res = simplex(np.array([1.0, 2.0]), A_eq, np.array([1.0, 2.0]))
    assert res.value == pytest.approx(1.0)


def test_simplex_infeasible():
    with pytest.raises(LPInfeasibleError) as info:
        simplex(np.array([1.0]), np.array([[1.0]]), np.array([2.0]), np.array([[1.0]]), np.array([1.0]))
    assert info.value.phase_one_value > 0


# ---------------------------------------------------------------- exact LPs

def _instances():
    rng = np.random.default_rng(7)
    out = []
    for k in range(8):
        L = None if k % 2 == 0 else int(rng.integers(1, 4))
        out.append(random_tiny(rng, n=int(rng.integers(2, 5)), T=int(rng.integers(2, 5)), L=L,
                               time_varying=k % 3 == 0))
    return out


@pytest.mark.parametrize("problem", _instances())
def test_path_lp_flows_are_feasible_and_optimal_value_consistent(problem):
    res = solve_exact_lp(problem)
    L = 1 if isinstance(problem, SingleCommodityProblem) else problem.L
    total = 0.0
    occupancy = np.zeros((problem.T, problem.n))
    for ell in range(L):
        src, snk = oracle._targets(problem, ell)
        paths, flows = res.paths[ell].paths, res.flows[ell]
        assert np.all(flows >= -1e-12)
        first = np.bincount(paths[:, 0], flows, minlength=problem.n) if len(flows) else np.zeros(problem.n)
        last = np.bincount(paths[:, -1], flows, minlength=problem.n) if len(flows) else np.zeros(problem.n)
        assert np.allclose(first, src, atol=1e-9)
        assert np.allclose(last, snk, atol=1e-9)
        for t in range(problem.T):
            occupancy[t] += np.bincount(paths[:, t], flows, minlength=problem.n)
        total += float(res.paths[ell].costs @ flows)
    assert np.all(occupancy[1:-1] <= problem.d + 1e-9)
    assert total == pytest.approx(res.value, abs=1e-9)


@pytest.mark.parametrize("problem", _instances())
def test_path_lp_equals_node_edge_lp(problem):
    assert solve_exact_lp(problem).value == pytest.approx(solve_node_edge_lp(problem), abs=1e-9)


def test_lp_without_capacities_is_cheapest_path():
    # point masses and slack capacities: all mass takes one cheapest path
    rng = np.random.default_rng(3)
    p = random_tiny(rng, n=4, T=4, cap=10.0)
    p.mu_1 = np.array([2.0, 0, 0, 0])
    p.mu_T = np.array([0, 0, 2.0, 0])
    assert solve_exact_lp(p).value == pytest.approx(2.0 * enumerate_paths(p).costs.min(), abs=1e-12)


# ---------------------------------------------------------------- dense Sinkhorn

def test_dense_sinkhorn_bimarginal_case_is_classical_sinkhorn():
    # T = 2, no capacities: alternate u = mu_1 / (K v), v = mu_T / (K^T u)
    rng = np.random.default_rng(0)
    C = rng.random((3, 3))
    mu1 = np.array([0.2, 0.3, 0.5])
    muT = np.array([0.4, 0.4, 0.2])
    p = SingleCommodityProblem(StructureMatrix.from_dense(C), np.zeros(3), mu1, muT, np.zeros((0, 3)), 2, 0.7)
    K = np.exp(-C / 0.7)
    u, v = np.ones(3), np.ones(3)
    for scal in oracle.dense_sinkhorn(p, 5):
        u = mu1 / (K @ v)
        v = muT / (K.T @ u)
        assert np.allclose(scal["u"][0], u, rtol=1e-13)
        assert np.allclose(scal["u"][1], v, rtol=1e-13)


def test_dense_entropy_uniform():
    M = np.full(8, 1 / 8)
    assert oracle.dense_entropy(M) == pytest.approx(np.sum(M * np.log(M)) + 1 - 8)


def test_dense_entropy_single_unit():
    M = np.zeros((2, 2, 2))
    M[0, 1, 0] = 1.0
    assert oracle.dense_entropy(M) == 0.0


# ---------------------------------------------------------------- instance generator

@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 4), st.sampled_from([None, 1, 3]))
@settings(max_examples=25, deadline=None)
def test_random_tiny_is_feasible(seed, n, T, L):
    p = random_tiny(np.random.default_rng(seed), n=n, T=T, L=L)
    assert np.isfinite(solve_node_edge_lp(p))
    assert p.total_mass == pytest.approx(1.0)


def test_random_tiny_rejects_hopeless_capacity():
    with pytest.raises(ValueError, match="cannot carry"):
        random_tiny(np.random.default_rng(0), n=2, T=4, cap=0.3)
