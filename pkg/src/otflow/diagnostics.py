"""Objectives, constraint mismatches, entropy and convergence traces."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


class InconsistentFlowError(ValueError):
    """Flow found on a transition outside the structure support."""


@dataclass
class SweepRecord:
    sweep: int
    seconds: float
    eq_mismatch: float
    cap_violation: float
    dual: float
    primal: float


TRACE_COLUMNS = tuple(f.name for f in fields(SweepRecord))


@dataclass
class SolveReport:
    """Per-sweep convergence trace; ``update_duals`` holds the dual after every block
    update when a solve is run with ``trace_updates=True``."""

    records: list = field(default_factory=list)
    converged: bool = False
    update_duals: list = field(default_factory=list)

    def append(self, record: SweepRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def sweeps(self) -> int:
        return self.records[-1].sweep if self.records else 0

    @property
    def final_error(self) -> float:
        if not self.records:
            return np.inf
        r = self.records[-1]
        return max(r.eq_mismatch, r.cap_violation)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.records:
                w.writerow([r.sweep, f"{r.seconds:.6f}"] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[2:]])

    @classmethod
    def from_csv(cls, path) -> "SolveReport":
        rep = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rep.append(SweepRecord(int(row["sweep"]), *(float(row[c]) for c in TRACE_COLUMNS[1:])))
        return rep


@dataclass
class FlowSolution:
    """Marginals of a solved plan.

    ``marginals`` is ``(T, n)``, ``bimarginals`` is ``(T, L, n)`` (per commodity
    occupancy), ``transitions[t-1]`` is ``(L, nnz)`` on the support pairs
    ``transition_support[t-1] = (rows, cols)``.
    """

    marginals: np.ndarray
    bimarginals: np.ndarray
    transitions: list | None = None
    transition_support: list | None = None
    total_mass: float = 0.0

    @property
    def T(self) -> int:
        return self.marginals.shape[0]

    @property
    def L(self) -> int:
        return self.bimarginals.shape[1]

    def transition_matrix(self, t: int, commodity: int | None = None) -> np.ndarray:
        """Dense ``P_{t,t+1}`` (summed over commodities unless one is given)."""
        rows, cols = self.transition_support[t - 1]
        flow = self.transitions[t - 1]
        flow = flow.sum(axis=0) if commodity is None else flow[commodity]
        n = self.marginals.shape[1]
        out = np.zeros((n, n))
        np.add.at(out, (rows, cols), flow)
        return out

    def to_dict(self) -> dict:
        doc = {
            "T": self.T, "L": self.L, "n": int(self.marginals.shape[1]),
            "total_mass": self.total_mass,
            "marginals": self.marginals.tolist(),
            "bimarginals": self.bimarginals.tolist(),
        }
        if self.transitions is not None:
            doc["transitions"] = [
                {"rows": r.tolist(), "cols": c.tolist(), "flow": f.tolist()}
                for (r, c), f in zip(self.transition_support, self.transitions)
            ]
        return doc

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n")

    def to_csv(self, path, threshold: float = 0.0) -> None:
        """Long format ``t, commodity, state, flow`` of the per-commodity occupancy."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "commodity", "state", "flow"])
            for t, ell, i in zip(*np.nonzero(self.bimarginals > threshold)):
                w.writerow([t + 1, ell, i, repr(float(self.bimarginals[t, ell, i]))])


def structure_lookup(structure, rows, cols) -> tuple[np.ndarray, np.ndarray]:
    """Cost ``C[rows, cols]`` and a mask of pairs that lie on the support."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.zeros(rows.shape)
    found = np.zeros(rows.shape, dtype=bool)
    for k, (i, j) in enumerate(zip(rows, cols)):
        a, b = structure.indptr[i], structure.indptr[i + 1]
        pos = a + np.searchsorted(structure.indices[a:b], j)
        if pos < b and structure.indices[pos] == j:
            vals[k] = structure.data[pos]
            found[k] = True
    return vals, found


def primal_objective(flows: FlowSolution, problem) -> float:
    """Transport cost of ``flows``: state costs on the marginals plus transition costs."""
    from .problems import SingleCommodityProblem

    T = problem.T
    if isinstance(problem, SingleCommodityProblem):
        total = float(np.sum(problem.c[None, :] * flows.marginals))
    else:
        total = float(np.sum(problem.C_L[None] * flows.bimarginals[1:T - 1]))
    if flows.transitions is None:
        raise ValueError("transition flows are required for the primal objective")
    mass = max(flows.total_mass, np.finfo(float).tiny)
    for t in range(1, T):
        rows, cols = flows.transition_support[t - 1]
        flow = flows.transitions[t - 1].sum(axis=0)
        cost, found = structure_lookup(problem.structure_at(t), rows, cols)
        off = flow[~found].sum()
        if off > 1e-9 * mass:
            raise InconsistentFlowError(f"flow {off:.3g} off the structure support at t={t}")
        total += float(np.dot(cost[found], flow[found]))
    return total


def _module_for(state):
    from . import sinkhorn_multi, sinkhorn_path

    if isinstance(state, sinkhorn_path.PathScalingState):
        return sinkhorn_path
    if isinstance(state, sinkhorn_multi.MultiScalingState):
        return sinkhorn_multi
    raise TypeError(f"not a scaling state: {type(state).__name__}")


def dual_objective(state, problem=None) -> float:
    """Dual objective of the current scalings.

    ``-eps <K, U>`` plus ``eps <log u, target>`` over every constraint, i.e.
    ``lambda = -eps log u`` with ``0 * log 0 = 0``.  Messages must be consistent.
    """
    return _module_for(state).dual_value(state)


def mismatch_report(state_or_flows, problem) -> dict:
    """Absolute and mass-relative L1 constraint errors plus flow-balance residuals."""
    from .problems import SingleCommodityProblem

    flows = state_or_flows
    if not isinstance(flows, FlowSolution):
        flows = _module_for(flows).extract_flows(flows)
    T = problem.T
    if isinstance(problem, SingleCommodityProblem):
        eq_first = np.abs(flows.marginals[0] - problem.mu_1).sum()
        eq_last = np.abs(flows.marginals[-1] - problem.mu_T).sum()
        mass = problem.total_mass
    else:
        eq_first = np.abs(flows.bimarginals[0] - problem.R01).sum()
        eq_last = np.abs(flows.bimarginals[-1] - problem.R0T).sum()
        mass = problem.total_mass
    cap = np.array([np.maximum(flows.marginals[t] - problem.d[t - 1], 0).sum() for t in range(1, T - 1)])
    balance = 0.0
    if flows.transitions is not None:
        n = flows.marginals.shape[1]
        for t in range(1, T):
            rows, cols = flows.transition_support[t - 1]
            for ell in range(flows.L):
                f = flows.transitions[t - 1][ell]
                out = np.bincount(rows, f, minlength=n)
                inn = np.bincount(cols, f, minlength=n)
                balance = max(balance, np.abs(out - flows.bimarginals[t - 1, ell]).sum(),
                              np.abs(inn - flows.bimarginals[t, ell]).sum())
    mass = max(mass, np.finfo(float).tiny)
    cap_total = float(cap.sum()) if cap.size else 0.0
    cap_max = float(cap.max()) if cap.size else 0.0
    return {
        "eq_source": float(eq_first), "eq_sink": float(eq_last),
        "eq_source_rel": float(eq_first / mass), "eq_sink_rel": float(eq_last / mass),
        "cap_violation": cap_total, "cap_violation_rel": cap_total / mass,
        "cap_violation_max_step_rel": cap_max / mass,
        "flow_balance": float(balance), "flow_balance_rel": float(balance / mass),
        "total_mass": float(mass),
    }


def entropy(state) -> float:
    """``D(M) = sum over positive cells of (M log M + M - 1)``, from the factorization."""
    return _module_for(state).entropy(state)
