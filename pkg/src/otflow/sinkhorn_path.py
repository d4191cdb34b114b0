"""Structured Sinkhorn scaling for the single-commodity dynamic flow problem.

The transport plan is the tensor ``M = K ⊙ U`` with

    M[i_1, ..., i_T] = prod_t u_t[i_t] k_t[i_t] * prod_t K_t[i_t, i_{t+1}],

which is never formed.  Projections are products of a backward message
``phi_t`` (sum over the future) and a forward message ``phihat_t`` (sum over
the past); a sweep costs ``O(T * nnz(K))``.  Scalings and messages are kept
as logarithms, see :mod:`otflow.kernel`.
"""
from __future__ import annotations

import numpy as np

from . import _scaling as core
from ._scaling import InfeasibleError, ScalingState
from .kernel import LogKernel, build_log_kernel
from .problems import SingleCommodityProblem, check_problem

__all__ = [
    "InfeasibleError", "PathScalingState", "init_state", "from_arrays", "backward_pass", "forward_pass",
    "project_marginal", "sweep", "errors", "solve", "extract_flows", "scalings", "phi", "phihat",
]


class PathScalingState(ScalingState):
    """Scalings ``u_1..u_T`` and messages ``phi_t``, ``phihat_t`` (one row)."""


def _as_state(st: ScalingState) -> PathScalingState:
    st.__class__ = PathScalingState
    return st


def from_arrays(K, k, mu_1, mu_T, d, epsilon: float = 1.0, c=None, labels=None) -> PathScalingState:
    """State from explicit kernels.

    ``K`` is one :class:`~otflow.kernel.LogKernel` (repeated) or a list of
    ``T - 1`` of them; ``k`` is the ``(T, n)`` node kernel ``exp(-c / eps)``.
    ``c`` only feeds the transport cost.
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    T, n = k.shape
    if isinstance(K, LogKernel):
        K = [K] * (T - 1)
    with np.errstate(divide="ignore"):
        w = [np.log(k[t])[None, :] for t in range(T)]
    c = np.zeros((T, n)) if c is None else np.broadcast_to(np.asarray(c, dtype=float), (T, n))
    cost = [c[t][None, :] for t in range(T)]
    st = core.new_state(K, w, cost, np.asarray(mu_1, dtype=float)[None, :],
                        np.asarray(mu_T, dtype=float)[None, :], d, epsilon, labels, row_kind="")
    return _as_state(st)


def init_state(problem: SingleCommodityProblem) -> PathScalingState:
    """Scalings equal to one on each constraint's support, zero elsewhere; messages computed."""
    check_problem(problem)
    T, eps = problem.T, problem.epsilon
    w = [(-problem.c / eps)[None, :]] * T
    cost = [problem.c[None, :]] * T
    labels = tuple(str(s) for s in problem.space.states) if problem.space is not None else None
    st = core.new_state(core.kernels_for(problem), w, cost, problem.mu_1[None, :], problem.mu_T[None, :],
                        problem.d, eps, labels, row_kind="")
    return _as_state(st)


def _exp(x):
    with np.errstate(over="ignore"):
        return np.exp(x)


def phi(st: PathScalingState, t: int) -> np.ndarray:
    """Backward message ``phi_t`` (sum over states after ``t``)."""
    return _exp(st.bwd[t - 1][0])


def phihat(st: PathScalingState, t: int) -> np.ndarray:
    """Forward message ``phihat_t`` (sum over states before ``t``)."""
    return _exp(st.fwd[t - 1][0])


def scalings(st: PathScalingState) -> np.ndarray:
    """``u_t`` for ``t = 1..T`` as a ``(T, n)`` array."""
    return _exp(np.array([core.scale(st, t)[0] for t in range(1, st.T + 1)]))


def backward_pass(st: PathScalingState) -> np.ndarray:
    """``phi_T = 1``, ``phi_t = K_t (u_{t+1} ⊙ k_{t+1} ⊙ phi_{t+1})``; returns ``(T, n)`` values."""
    core.backward(st)
    return np.array([phi(st, t) for t in range(1, st.T + 1)])


def forward_pass(st: PathScalingState) -> np.ndarray:
    """``phihat_1 = 1``, ``phihat_t = K_{t-1}^T (u_{t-1} ⊙ k_{t-1} ⊙ phihat_{t-1})``."""
    core.forward(st)
    return np.array([phihat(st, t) for t in range(1, st.T + 1)])


def project_marginal(st: PathScalingState, t: int) -> np.ndarray:
    """``P_t = u_t ⊙ k_t ⊙ phihat_t ⊙ phi_t``."""
    return core.bimarginal(st, t)[0]


def sweep(st: PathScalingState, trace: list | None = None, hook=None) -> tuple[float, float]:
    """One pass: ``u_1``, then ``u_2..u_{T-1}`` forward in time, then ``u_T``.

    Returns the ``(equality, capacity)`` errors afterwards.  With ``trace`` the
    dual objective is appended after every block update; ``hook(state, t)`` is
    called right after the update of ``u_t``.
    """
    core.sweep(st, trace, hook)
    return core.errors(st)


def errors(st: PathScalingState) -> tuple[float, float]:
    return core.errors(st)


def dual_value(st: PathScalingState, t: int = 1) -> float:
    return core.dual_value(st, t)


def transport_cost(st: PathScalingState) -> float:
    return core.transport_cost(st)


def log_support_size(st: PathScalingState) -> float:
    return core.log_support_size(st)


def entropy(st: PathScalingState) -> float:
    return core.entropy(st)


def solve(problem: SingleCommodityProblem, tol: float = 1e-8, max_sweeps: int = 1000,
          trace_updates: bool = False, callback=None):
    """Sweep until the relative marginal error is below ``tol``.

    Returns ``(state, report)``.  Hitting ``max_sweeps`` leaves
    ``report.converged`` false; it does not raise.
    """
    st = init_state(problem)
    return st, core.run(st, tol, max_sweeps, trace_updates, callback)


def transition_flow(st: PathScalingState, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``P_{t,t+1}`` on the kernel support as ``(rows, cols, flow)``."""
    K = st.K[t - 1]
    return K.rows, K.cols, core.transition(st, t)[0]


def extract_flows(st: PathScalingState):
    """Marginals ``P_t`` and transitions ``P_{t,t+1}`` (``bimarginals`` has a single row)."""
    return core.flow_solution(st)


def log_kernel(structure, epsilon: float) -> LogKernel:
    return build_log_kernel(structure, epsilon)
