import json

import numpy as np
import pytest

from otflow import diagnostics as dg
from otflow import oracle
from otflow import sinkhorn_multi as sm
from otflow import sinkhorn_path as sp
from otflow.diagnostics import FlowSolution, InconsistentFlowError, SolveReport, SweepRecord
from otflow.graph_model import StructureMatrix
from otflow.kernel import build_log_kernel
from otflow.oracle import random_tiny
from otflow.problems import SingleCommodityProblem


def _chain(d=5.0):
    C = np.full((3, 3), np.inf)
    C[0, 1] = C[1, 2] = 0.0
    return SingleCommodityProblem(StructureMatrix.from_dense(C), [1.0, 2.0, 3.0], [1, 0, 0], [0, 0, 1],
                                  np.full((1, 3), d), 3, 1.0)


def _empty_flows(p):
    rows, cols = p.structure.indptr, p.structure.indices
    r = np.repeat(np.arange(p.n), np.diff(rows))
    return FlowSolution(np.zeros((p.T, p.n)), np.zeros((p.T, 1, p.n)),
                        [np.zeros((1, cols.size))] * (p.T - 1), [(r, cols)] * (p.T - 1), 0.0)


# ---------------------------------------------------------------- objectives

def test_primal_of_zero_flow_is_zero():
    p = _chain()
    assert dg.primal_objective(_empty_flows(p), p) == 0.0


def test_primal_of_chain_is_six():
    p = _chain()
    st_, rep = sp.solve(p, tol=1e-12)
    assert rep.converged
    assert dg.primal_objective(sp.extract_flows(st_), p) == pytest.approx(6.0, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_primal_matches_dense_cost(seed):
    rng = np.random.default_rng(seed)
    p = random_tiny(rng, n=3, T=4, L=None if seed % 2 else 2)
    mod = sp if seed % 2 else sm
    st_ = mod.init_state(p)
    for _ in range(3):
        mod.sweep(st_)
    sc = {"u": sp.scalings(st_)} if seed % 2 else {"U01": st_.U01, "U0T": st_.U0T, "u": st_.shared_scalings()}
    M = oracle.dense_plan(p, sc).values
    C = oracle.dense_cost_tensor(p).values
    pos = M > 0
    assert dg.primal_objective(mod.extract_flows(st_), p) == pytest.approx(float(np.sum(M[pos] * C[pos])), rel=1e-10)


def test_flow_off_support_raises():
    p = _chain()
    flows = _empty_flows(p)
    flows.transition_support[0] = (np.array([2]), np.array([0]))
    flows.transitions[0] = np.array([[0.5]])
    flows.total_mass = 1.0
    with pytest.raises(InconsistentFlowError, match="t=1"):
        dg.primal_objective(flows, p)


def test_dual_of_all_ones_scalings():
    # ones kernel on two states over three steps: <K, 1> = 8
    K = build_log_kernel(StructureMatrix.from_dense(np.zeros((2, 2))), 1.0)
    st_ = sp.from_arrays(K, np.ones((3, 2)), np.ones(2), np.ones(2), np.full((1, 2), 10.0), epsilon=0.5)
    assert dg.dual_objective(st_) == pytest.approx(-0.5 * 8)


@pytest.mark.parametrize("seed", range(4))
def test_dual_matches_dense_formula(seed):
    rng = np.random.default_rng(seed)
    p = random_tiny(rng, n=3, T=4, L=2, cap=0.4)
    st_ = sm.init_state(p)
    for _ in range(3):
        sm.sweep(st_)
    sc = {"U01": st_.U01, "U0T": st_.U0T, "u": st_.shared_scalings()}
    mass = oracle.dense_plan(p, sc).values.sum()

    def dot(u, target):
        pos = target > 0
        return float(np.sum(np.log(u[pos]) * target[pos]))

    ref = -mass + dot(sc["U01"], p.R01) + dot(sc["U0T"], p.R0T)
    ref += sum(dot(sc["u"][k], p.d[k]) for k in range(p.T - 2))
    assert dg.dual_objective(st_) == pytest.approx(p.epsilon * ref, rel=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_weak_duality_and_gap_closes(seed):
    # at the fixed point <C, M> + eps * sum(M log M - M) equals the dual value;
    # the entropy counts M + M - 1 per positive cell, hence the correction
    rng = np.random.default_rng(seed)
    p = random_tiny(rng, n=4, T=5, cap=0.45)
    st_, rep = sp.solve(p, tol=1e-11, max_sweeps=20000)
    assert rep.converged
    mass = p.total_mass
    h = dg.entropy(st_) - 2 * mass + np.exp(sp.log_support_size(st_))
    reg = dg.primal_objective(sp.extract_flows(st_), p) + p.epsilon * h
    assert reg == pytest.approx(dg.dual_objective(st_), rel=1e-7, abs=1e-9)


def test_entropy_matches_dense():
    p = random_tiny(np.random.default_rng(5), n=3, T=3)
    st_ = sp.init_state(p)
    sp.sweep(st_)
    M = oracle.dense_plan(p, {"u": sp.scalings(st_)}).values
    assert dg.entropy(st_) == pytest.approx(oracle.dense_entropy(M), rel=1e-12)


def test_not_a_state():
    with pytest.raises(TypeError):
        dg.entropy(object())


# ---------------------------------------------------------------- mismatches

def test_mismatch_report_converged():
    p = random_tiny(np.random.default_rng(1), n=4, T=5, L=2, cap=0.4)
    st_, _ = sm.solve(p, tol=1e-10, max_sweeps=5000)
    rep = dg.mismatch_report(st_, p)
    assert rep["eq_source_rel"] < 1e-10 and rep["eq_sink_rel"] < 1e-10
    assert rep["cap_violation_rel"] < 1e-9
    assert rep["flow_balance_rel"] < 1e-12
    assert rep["total_mass"] == pytest.approx(1.0)


def test_mismatch_stays_away_from_zero_when_capacity_below_cut():
    # all mass must pass state 1 at t = 2, which holds only half of it
    p = _chain(d=0.5)
    st_ = sp.init_state(p)
    for _ in range(300):
        sp.sweep(st_)
    rep = dg.mismatch_report(st_, p)
    assert max(rep["eq_source_rel"], rep["eq_sink_rel"], rep["cap_violation_rel"]) > 0.1


def test_mismatch_accepts_flow_solution():
    p = random_tiny(np.random.default_rng(2))
    st_, _ = sp.solve(p, max_sweeps=5)
    assert dg.mismatch_report(st_, p) == dg.mismatch_report(sp.extract_flows(st_), p)


# ---------------------------------------------------------------- formats

def test_trace_csv_round_trip(tmp_path):
    rep = SolveReport([SweepRecord(1, 0.5, 0.1, 0.2, -1.0, 3.0), SweepRecord(2, 0.25, 1e-17, 0.0, -0.5, 2.0)])
    rep.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "sweep,seconds,eq_mismatch,cap_violation,dual,primal"
    back = SolveReport.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.column("eq_mismatch"), rep.column("eq_mismatch"))
    assert back.sweeps == 2 and back.final_error == 1e-17


def test_empty_report():
    rep = SolveReport()
    assert rep.sweeps == 0 and rep.final_error == np.inf


def test_solution_json_and_csv(tmp_path):
    p = random_tiny(np.random.default_rng(3), L=2)
    st_, _ = sm.solve(p, max_sweeps=20)
    flows = sm.extract_flows(st_)
    flows.to_json(tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert (doc["T"], doc["L"], doc["n"]) == (p.T, 2, p.n)
    assert np.allclose(doc["marginals"], flows.marginals)
    assert len(doc["transitions"]) == p.T - 1
    flows.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "t,commodity,state,flow"
    total = sum(float(r.split(",")[3]) for r in rows[1:])
    assert total == pytest.approx(flows.bimarginals.sum())
