"""Structured Sinkhorn scaling for the multi-commodity dynamic flow problem.

The plan is an ``L x n^T`` tensor

    M[l, i_1, ..., i_T] = U01[l, i_1] * prod_t K_t[i_t, i_{t+1}]
                          * prod_{t=2}^{T-1} K_L[l, i_t] u_t[i_t] * U0T[l, i_T].

Messages ``Psihat_t`` (past) and ``Psi_t`` (future) hold one row per
commodity and are stored as logarithms, see :mod:`otflow.kernel`.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from . import _scaling as core
from ._scaling import InfeasibleError, ScalingState
from .problems import MultiCommodityProblem, check_problem

__all__ = [
    "InfeasibleError", "MultiScalingState", "init_state", "from_arrays", "forward_psi", "backward_psi",
    "project_bimarginal", "project_marginal", "project_commodity_mass", "sweep", "errors", "solve",
    "extract_flows", "init_multi_tensor", "sweep_multi_tensor", "multi_tensor_dual",
]


class MultiScalingState(ScalingState):
    """Scalings ``U01``, ``U0T`` (``L x n``) and shared ``u_t`` for ``t = 2..T-1``."""

    @property
    def U01(self) -> np.ndarray:
        return _exp(self.A1)

    @property
    def U0T(self) -> np.ndarray:
        return _exp(self.AT)

    def shared_scalings(self) -> np.ndarray:
        """``u_t`` for ``t = 2..T-1`` as ``(T-2, n)``."""
        return _exp(np.array(self.a[1:-1]).reshape(max(self.T - 2, 0), self.n))


def _exp(x):
    with np.errstate(over="ignore"):
        return np.exp(x)


def _weights(log_KL: np.ndarray, C_L: np.ndarray | None, T: int):
    zero = np.zeros_like(log_KL)
    w = [zero] + [log_KL] * (T - 2) + [zero]
    cost = [zero] * T if C_L is None else [zero] + [C_L] * (T - 2) + [zero]
    return w, cost


def from_arrays(K, K_L, R01, R0T, d, epsilon: float = 1.0, C_L=None, labels=None) -> MultiScalingState:
    """State from explicit kernels: ``K`` is a list of ``T - 1`` :class:`~otflow.kernel.LogKernel`,
    ``K_L`` the ``(L, n)`` commodity kernel ``exp(-C_L / eps)``."""
    K = list(K)
    T = len(K) + 1
    with np.errstate(divide="ignore"):
        log_KL = np.log(np.asarray(K_L, dtype=float))
    w, cost = _weights(log_KL, None if C_L is None else np.asarray(C_L, dtype=float), T)
    st = core.new_state(K, w, cost, R01, R0T, d, epsilon, labels)
    st.__class__ = MultiScalingState
    return st


def init_state(problem: MultiCommodityProblem) -> MultiScalingState:
    """Scalings equal to one on each constraint's support, zero elsewhere; messages computed."""
    check_problem(problem)
    eps = problem.epsilon
    w, cost = _weights(-problem.C_L / eps, problem.C_L, problem.T)
    labels = tuple(str(s) for s in problem.space.states) if getattr(problem, "space", None) is not None else None
    st = core.new_state(core.kernels_for(problem), w, cost, problem.R01, problem.R0T, problem.d, eps, labels)
    st.__class__ = MultiScalingState
    return st


def forward_psi(st: MultiScalingState) -> list:
    """``Psihat_t`` values for ``t = 1..T`` (each ``L x n``)."""
    core.forward(st)
    return [_exp(m) for m in st.fwd]


def backward_psi(st: MultiScalingState) -> list:
    """``Psi_t`` values for ``t = 1..T`` (each ``L x n``)."""
    core.backward(st)
    return [_exp(m) for m in st.bwd]


def advance(st: MultiScalingState, t: int) -> np.ndarray:
    return core.advance(st, t)


def retreat(st: MultiScalingState, t: int) -> np.ndarray:
    return core.retreat(st, t)


def project_bimarginal(st: MultiScalingState, t: int) -> np.ndarray:
    """Per-commodity occupancy ``P^L_t`` (``L x n``)."""
    return core.bimarginal(st, t)


def project_marginal(st: MultiScalingState, t: int) -> np.ndarray:
    """Aggregate occupancy ``P_t``."""
    return core.marginal(st, t)


def project_commodity_mass(st: MultiScalingState, t: int = 1) -> np.ndarray:
    """Mass carried by each commodity (identical at every ``t`` once messages are consistent)."""
    return core.bimarginal(st, t).sum(axis=1)


def log_mass(st: MultiScalingState, t: int = 1) -> float:
    return core.log_mass(st, t)


def dual_value(st: MultiScalingState, t: int = 1) -> float:
    return core.dual_value(st, t)


def update_source(st: MultiScalingState) -> None:
    core.update_first(st)


def update_sink(st: MultiScalingState) -> None:
    core.update_last(st)


def update_middle(st: MultiScalingState, t: int) -> None:
    core.update_middle(st, t)


def sweep(st: MultiScalingState, trace: list | None = None, hook=None) -> tuple[float, float]:
    """Sources, shared capacities forward in time, then sinks; returns the errors afterwards."""
    core.sweep(st, trace, hook)
    return core.errors(st)


def errors(st: MultiScalingState) -> tuple[float, float]:
    return core.errors(st)


def transition_flow(st: MultiScalingState, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``P^l_{t,t+1}`` on the kernel support as ``(rows, cols, flow[L, nnz])``."""
    K = st.K[t - 1]
    return K.rows, K.cols, core.transition(st, t)


def transport_cost(st: MultiScalingState) -> float:
    return core.transport_cost(st)


def log_support_size(st: MultiScalingState) -> float:
    return core.log_support_size(st)


def entropy(st: MultiScalingState) -> float:
    return core.entropy(st)


def solve(problem: MultiCommodityProblem, tol: float = 1e-8, max_sweeps: int = 1000,
          trace_updates: bool = False, callback=None):
    """Sweep until the relative error is below ``tol``; returns ``(state, report)``."""
    st = init_state(problem)
    return st, core.run(st, tol, max_sweeps, trace_updates, callback)


def extract_flows(st: MultiScalingState):
    return core.flow_solution(st)


# Several single-commodity tensors coupled through shared capacities.  Each
# commodity keeps its own one-row state; the capacity update aggregates the
# projections of all of them.  Mathematically identical to the joint tensor.

def init_multi_tensor(problem: MultiCommodityProblem) -> list:
    """One single-row state per commodity, sharing the capacity scalings."""
    check_problem(problem)
    eps = problem.epsilon
    K = core.kernels_for(problem)
    states = []
    for ell in range(problem.L):
        w, cost = _weights(-problem.C_L[ell:ell + 1] / eps, problem.C_L[ell:ell + 1], problem.T)
        st = core.new_state(K, w, cost, problem.R01[ell:ell + 1], problem.R0T[ell:ell + 1],
                            problem.d, eps, row_kind="commodity")
        st.__class__ = MultiScalingState
        states.append(st)
    _share(states)
    return states


def _share(states: list) -> None:
    for st in states[1:]:
        st.a = states[0].a


def sweep_multi_tensor(states: list, trace: list | None = None) -> None:
    """Same block order as :func:`sweep`, each block applied to every commodity tensor."""
    T = states[0].T
    for st in states:
        if not st.fresh:
            core.backward(st)
        st.fresh = False
        core.update_first(st)
    if trace is not None:
        trace.append(multi_tensor_dual(states, 1))
    for st in states:
        core.advance(st, 2)
    for t in range(2, T):
        agg = np.array([core.base(st, t)[0] for st in states])
        with np.errstate(divide="ignore"):
            log_den = logsumexp(agg, axis=0)
        states[0].a[t - 1] = core.capped_log_ratio(states[0].d[t - 2], log_den)
        if trace is not None:
            trace.append(multi_tensor_dual(states, t))
        for st in states:
            core.advance(st, t + 1)
    for st in states:
        core.update_last(st)
    if trace is not None:
        trace.append(multi_tensor_dual(states, T))
    for st in states:
        core.backward(st)
        st.fresh = True
        st.sweeps += 1


def multi_tensor_dual(states: list, t: int = 1) -> float:
    """Dual objective of the coupled tensors (capacity terms counted once)."""
    eps = states[0].epsilon
    with np.errstate(over="ignore"):
        mass = sum(np.exp(core.log_mass(st, t)) for st in states)
    total = -mass
    for st in states:
        total += core._wdot(st.A1, st.R1) + core._wdot(st.AT, st.RT)
    st = states[0]
    for s in range(2, st.T):
        total += core._wdot(st.a[s - 1], st.d[s - 2])
    return float(eps * total)
