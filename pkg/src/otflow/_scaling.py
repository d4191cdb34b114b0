"""Log-domain core shared by the single- and multi-commodity solvers.

A plan with ``L`` rows (commodities) over ``T`` steps factorizes as

    M[l, i_1..i_T] = exp( A1[l, i_1] + sum_t w_t[l, i_t] + sum_{t=2}^{T-1} a_t[i_t]
                          + AT[l, i_T] + sum_t logK_t[i_t, i_{t+1}] )

with boundary log-scalings ``A1``, ``AT`` (one row per commodity), shared
capacity log-scalings ``a_t`` and fixed node weights ``w_t`` (``-c / eps`` for
one commodity, ``-C_L / eps`` in the middle for several).  ``fwd[t-1]`` holds
the log of the sum over the past of step ``t`` and ``bwd[t-1]`` the log of
the sum over the future; both are ``(L, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .kernel import LogKernel, build_log_kernel, log_matmul


class InfeasibleError(RuntimeError):
    """The support of the plan cannot carry the required mass."""


def _log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def kernels_for(problem) -> list:
    """One :class:`LogKernel` per transition, shared when the structure repeats."""
    cache: dict[int, LogKernel] = {}
    out = []
    for t in range(1, problem.T):
        s = problem.structure_at(t)
        if id(s) not in cache:
            cache[id(s)] = build_log_kernel(s, problem.epsilon)
        out.append(cache[id(s)])
    return out


@dataclass
class ScalingState:
    """Log scalings and messages.  ``fresh`` means all messages match all scalings."""

    K: list
    w: list          # T node log-weights, each (L, n)
    node_cost: list  # T node costs, each (L, n)
    R1: np.ndarray
    RT: np.ndarray
    d: np.ndarray
    A1: np.ndarray
    AT: np.ndarray
    a: list          # T entries; (n,) for t = 2..T-1, None at the ends
    fwd: list
    bwd: list
    epsilon: float = 1.0
    sweeps: int = 0
    fresh: bool = False
    labels: tuple | None = None
    row_kind: str = "commodity"

    @property
    def T(self) -> int:
        return len(self.w)

    @property
    def L(self) -> int:
        return self.R1.shape[0]

    @property
    def n(self) -> int:
        return self.R1.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.R1.sum())


def new_state(K, w, node_cost, R1, RT, d, epsilon, labels=None, row_kind="commodity") -> ScalingState:
    """Scalings at zero (one) on the support of each constraint, -inf elsewhere; messages computed."""
    T = len(w)
    R1 = np.atleast_2d(np.asarray(R1, dtype=float))
    RT = np.atleast_2d(np.asarray(RT, dtype=float))
    n = R1.shape[1]
    d = np.asarray(d, dtype=float).reshape(max(T - 2, 0), n)
    a = [None] + [np.where(d[t] > 0, 0.0, -np.inf) for t in range(T - 2)] + [None]
    st = ScalingState(
        list(K), list(w), list(node_cost), R1, RT, d,
        np.where(R1 > 0, 0.0, -np.inf), np.where(RT > 0, 0.0, -np.inf),
        a, [None] * T, [None] * T, float(epsilon), labels=labels, row_kind=row_kind,
    )
    backward(st)
    forward(st)
    st.fresh = True
    return st


def scale(st: ScalingState, t: int) -> np.ndarray:
    """Log-scaling acting on step ``t`` (``(L, n)`` at the ends, ``(1, n)`` inside)."""
    if t == 1:
        return st.A1
    if t == st.T:
        return st.AT
    return st.a[t - 1][None, :]


def node(st: ScalingState, t: int) -> np.ndarray:
    return st.w[t - 1] + scale(st, t)


def _row_name(st: ScalingState, ell: int) -> str:
    return f"{st.row_kind} {ell}" if st.row_kind else "the commodity"


def _state_name(st: ScalingState, i: int) -> str:
    return f"state {i} ({st.labels[i]})" if st.labels is not None else f"state {i}"


def _check(st: ScalingState, msg: np.ndarray, t: int, which: str) -> None:
    dead = ~np.any(np.isfinite(msg), axis=1) & (st.R1.sum(axis=1) > 0)
    if dead.any():
        ell = int(np.flatnonzero(dead)[0])
        raise InfeasibleError(
            f"{_row_name(st, ell)} has no feasible path: {which} message vanishes at t={t}")


def advance(st: ScalingState, t: int) -> np.ndarray:
    """Refresh ``fwd[t-1]`` (``t >= 2``) from step ``t - 1``."""
    msg = log_matmul(st.fwd[t - 2] + node(st, t - 1), st.K[t - 2])
    _check(st, msg, t, "forward")
    st.fwd[t - 1] = msg
    return msg


def retreat(st: ScalingState, t: int) -> np.ndarray:
    """Refresh ``bwd[t-1]`` (``t <= T-1``) from step ``t + 1``."""
    msg = log_matmul(st.bwd[t] + node(st, t + 1), st.K[t - 1], transpose=True)
    _check(st, msg, t, "backward")
    st.bwd[t - 1] = msg
    return msg


def forward(st: ScalingState) -> None:
    st.fwd[0] = np.zeros((st.L, st.n))
    for t in range(2, st.T + 1):
        advance(st, t)


def backward(st: ScalingState) -> None:
    st.bwd[st.T - 1] = np.zeros((st.L, st.n))
    for t in range(st.T - 1, 0, -1):
        retreat(st, t)


def base(st: ScalingState, t: int) -> np.ndarray:
    """Log of the projection at ``t`` with the scaling of ``t`` left out."""
    return st.fwd[t - 1] + st.bwd[t - 1] + st.w[t - 1]


def log_bimarginal(st: ScalingState, t: int) -> np.ndarray:
    return base(st, t) + scale(st, t)


def bimarginal(st: ScalingState, t: int) -> np.ndarray:
    """Row-by-state occupancy at step ``t``."""
    with np.errstate(over="ignore"):
        return np.exp(log_bimarginal(st, t))


def marginal(st: ScalingState, t: int) -> np.ndarray:
    """Occupancy at ``t`` summed over rows."""
    with np.errstate(over="ignore"):
        return np.exp(_lse0(log_bimarginal(st, t)))


def _lse0(x: np.ndarray) -> np.ndarray:
    if x.shape[0] == 1:
        return x[0]
    with np.errstate(divide="ignore"):
        return logsumexp(x, axis=0)


def log_mass(st: ScalingState, t: int = 1) -> float:
    x = log_bimarginal(st, t)
    if not np.isfinite(x).any():
        return -np.inf
    return float(logsumexp(x[np.isfinite(x)]))


def _boundary(st: ScalingState, R: np.ndarray, t: int, which: str) -> np.ndarray:
    b = base(st, t)
    pos = R > 0
    bad = pos & ~np.isfinite(b)
    if bad.any():
        ell, i = (int(x) for x in np.argwhere(bad)[0])
        if st.L == 1 and st.row_kind == "":
            raise InfeasibleError(f"infeasible: required {which} mass at {_state_name(st, i)} is unreachable")
        raise InfeasibleError(f"{_row_name(st, ell)} cannot reach its {which} at {_state_name(st, i)}")
    with np.errstate(invalid="ignore"):
        return np.where(pos, _log(np.where(pos, R, 1.0)) - np.where(pos, b, 0.0), -np.inf)


def update_first(st: ScalingState) -> None:
    st.A1 = _boundary(st, st.R1, 1, "source")


def update_last(st: ScalingState) -> None:
    st.AT = _boundary(st, st.RT, st.T, "sink")


def capped_log_ratio(d: np.ndarray, log_den: np.ndarray) -> np.ndarray:
    """``log min(d / den, 1)``; ``d = 0`` prunes the state, ``den = 0`` with ``d > 0`` gives 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.minimum(_log(d) - log_den, 0.0)
    r = np.where(np.isfinite(log_den), r, 0.0)
    return np.where(d > 0, r, -np.inf)


def aggregate_base(st: ScalingState, t: int) -> np.ndarray:
    return _lse0(base(st, t))


def update_middle(st: ScalingState, t: int) -> None:
    st.a[t - 1] = capped_log_ratio(st.d[t - 2], aggregate_base(st, t))


def _wdot(logs: np.ndarray, weights: np.ndarray) -> float:
    m = (weights > 0) & np.isfinite(weights)
    return float(np.sum(logs[m] * weights[m])) if m.any() else 0.0


def dual_value(st: ScalingState, t: int = 1) -> float:
    """``eps * (-<K, U> + <A1, R1> + <AT, RT> + sum_t <a_t, d_t>)``, mass from step ``t``."""
    with np.errstate(over="ignore"):
        mass = np.exp(log_mass(st, t))
    total = -mass + _wdot(st.A1, st.R1) + _wdot(st.AT, st.RT)
    for s in range(2, st.T):
        total += _wdot(st.a[s - 1], st.d[s - 2])
    return float(st.epsilon * total)


def sweep(st: ScalingState, trace: list | None = None, hook=None) -> None:
    """Sources, then capacities forward in time, then sinks; ends with a backward refresh.

    ``trace`` collects the dual objective after every block update; ``hook(st, t)``
    is called at the same moments, while the messages at step ``t`` are current.
    """
    T = st.T

    def done(t):
        if trace is not None:
            trace.append(dual_value(st, t))
        if hook is not None:
            hook(st, t)

    if not st.fresh:
        backward(st)
    st.fresh = False
    update_first(st)
    done(1)
    advance(st, 2)
    for t in range(2, T):
        update_middle(st, t)
        done(t)
        advance(st, t + 1)
    update_last(st)
    done(T)
    backward(st)
    st.fresh = True
    st.sweeps += 1


def errors(st: ScalingState) -> tuple[float, float]:
    """``(equality mismatch, capacity violation)``, each an L1 norm over total mass."""
    mass = max(st.total_mass, np.finfo(float).tiny)
    eq = max(np.abs(bimarginal(st, 1) - st.R1).sum(), np.abs(bimarginal(st, st.T) - st.RT).sum())
    cap = 0.0
    for t in range(2, st.T):
        cap = max(cap, np.maximum(marginal(st, t) - st.d[t - 2], 0.0).sum())
    return float(eq / mass), float(cap / mass)


def log_transition(st: ScalingState, t: int) -> np.ndarray:
    """``log P^l_{t,t+1}`` on the support of ``K_t``, shape ``(L, nnz)``."""
    K = st.K[t - 1]
    left = st.fwd[t - 1] + node(st, t)
    right = st.bwd[t] + node(st, t + 1)
    return left[:, K.rows] + K.log_data[None, :] + right[:, K.cols]


def transition(st: ScalingState, t: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(log_transition(st, t))


def transport_cost(st: ScalingState) -> float:
    """Node costs on the occupancies plus structure costs on the transitions."""
    total = 0.0
    for t in range(1, st.T + 1):
        c = st.node_cost[t - 1]
        if np.any(c):
            total += float(np.sum(c * bimarginal(st, t)))
    for t in range(1, st.T):
        K = st.K[t - 1]
        if K.cost is not None and np.any(K.cost):
            total += float(np.sum(transition(st, t) * K.cost[None, :]))
    return total


def log_support_size(st: ScalingState) -> float:
    """``log`` of the number of tensor cells with ``M > 0``."""
    ind = lambda x: np.where(np.isfinite(x), 0.0, -np.inf)  # noqa: E731
    msg = ind(node(st, 1))
    for t in range(2, st.T + 1):
        msg = log_matmul(msg, st.K[t - 2].indicator()) + ind(node(st, t))
    x = msg[np.isfinite(msg)]
    return float(logsumexp(x)) if x.size else -np.inf


def entropy(st: ScalingState) -> float:
    """``sum_{M > 0} (M log M + M - 1)`` through the factorization of ``log M``."""
    mlogm = 0.0
    for t in range(1, st.T + 1):
        P = bimarginal(st, t)
        lg = node(st, t)
        pos = P > 0
        mlogm += float(np.sum(np.broadcast_to(lg, P.shape)[pos] * P[pos]))
    for t in range(1, st.T):
        F = transition(st, t)
        pos = F > 0
        mlogm += float(np.sum(np.broadcast_to(st.K[t - 1].log_data, F.shape)[pos] * F[pos]))
    mass = float(bimarginal(st, 1).sum())
    with np.errstate(over="ignore"):
        count = np.exp(log_support_size(st))
    return mlogm + mass - count


def run(st: ScalingState, tol: float, max_sweeps: int, trace_updates: bool = False, callback=None):
    """Sweep until the relative constraint error drops below ``tol``; returns a SolveReport."""
    import time

    from .diagnostics import SolveReport, SweepRecord

    if tol <= 0 or max_sweeps < 0:
        raise ValueError("tol must be positive and max_sweeps nonnegative")
    report = SolveReport()
    start = time.perf_counter()
    for _ in range(max_sweeps):
        trace = [] if trace_updates else None
        sweep(st, trace)
        eq, cap = errors(st)
        report.append(SweepRecord(st.sweeps, time.perf_counter() - start, eq, cap,
                                  dual_value(st), transport_cost(st)))
        if trace is not None:
            report.update_duals.extend(trace)
        if callback is not None:
            callback(st, report)
        if max(eq, cap) < tol:
            report.converged = True
            break
    return report


def flow_solution(st: ScalingState):
    from .diagnostics import FlowSolution

    T = st.T
    bi = np.array([bimarginal(st, t) for t in range(1, T + 1)])
    trans = [transition(st, t) for t in range(1, T)]
    support = [(st.K[t - 1].rows, st.K[t - 1].cols) for t in range(1, T)]
    return FlowSolution(marginals=bi.sum(axis=1), bimarginals=bi, transitions=trans,
                        transition_support=support, total_mass=st.total_mass)
