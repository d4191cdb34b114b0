"""Exact and brute-force reference computations at desk scale.

Everything here is deliberately naive: paths are enumerated explicitly, linear
programs go through a dense-tableau simplex, and Sinkhorn iterations sum the
full tensor.  Hard caps keep the oracle from being pointed at real instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_model import StructureMatrix
from .problems import MultiCommodityProblem, SingleCommodityProblem

MAX_PATHS = 10**6
MAX_LP_PATHS = 10**5
MAX_TENSOR = 10**7


class OracleCapError(ValueError):
    """Instance too large for the reference implementation."""


class LPInfeasibleError(RuntimeError):
    """Phase one of the simplex ended with a positive infeasibility."""

    def __init__(self, phase_one_value: float):
        super().__init__(f"LP infeasible: phase-one optimum {phase_one_value:.6g} > 0")
        self.phase_one_value = phase_one_value


# --------------------------------------------------------------------------- problem access


def _targets(problem, commodity: int):
    if isinstance(problem, SingleCommodityProblem):
        if commodity != 0:
            raise IndexError("single-commodity problem has only commodity 0")
        return problem.mu_1, problem.mu_T
    return problem.R01[commodity], problem.R0T[commodity]


def _state_costs(problem, commodity: int) -> np.ndarray:
    """``(T, n)`` state costs along a path of ``commodity``."""
    T, n = problem.T, problem.n
    if isinstance(problem, SingleCommodityProblem):
        return np.tile(problem.c, (T, 1))
    out = np.zeros((T, n))
    out[1:T - 1] = problem.C_L[commodity]
    return out


# --------------------------------------------------------------------------- paths


@dataclass
class PathSet:
    """Feasible paths of one commodity as an ``(P, T)`` array of states, with costs."""

    paths: np.ndarray
    costs: np.ndarray
    commodity: int = 0

    def __len__(self) -> int:
        return self.paths.shape[0]


def _reach_counts(problem, commodity: int) -> list:
    """``counts[t-1][i]``: number of feasible continuations from state ``i`` at ``t``."""
    T, n = problem.T, problem.n
    _, sink = _targets(problem, commodity)
    counts = [None] * T
    counts[T - 1] = (sink > 0).astype(float)
    for t in range(T - 1, 0, -1):
        s = problem.structure_at(t)
        nxt = counts[t]
        counts[t - 1] = np.array([nxt[s.row(i)[0]].sum() for i in range(n)])
    return counts


def count_paths(problem, commodity: int = 0) -> int:
    source, _ = _targets(problem, commodity)
    return int(_reach_counts(problem, commodity)[0][source > 0].sum())


def enumerate_paths(problem, commodity: int = 0, cap: int = MAX_PATHS) -> PathSet:
    """All state sequences from the source support to the sink support along the structure."""
    total = count_paths(problem, commodity)
    if total > cap:
        raise OracleCapError(f"{total} paths exceed the oracle cap of {cap}")
    T = problem.T
    counts = _reach_counts(problem, commodity)
    source, _ = _targets(problem, commodity)
    costs_t = _state_costs(problem, commodity)
    out_paths, out_costs = [], []
    stack = [(int(i), 1, (int(i),), costs_t[0, i]) for i in np.flatnonzero(source > 0)[::-1] if counts[0][i] > 0]
    while stack:
        i, t, seq, cost = stack.pop()
        if t == T:
            out_paths.append(seq)
            out_costs.append(cost)
            continue
        cols, vals = problem.structure_at(t).row(i)
        for j, v in sorted(zip(cols.tolist(), vals.tolist()), reverse=True):
            if counts[t][j] > 0:
                stack.append((j, t + 1, seq + (j,), cost + v + costs_t[t, j]))
    paths = np.array(out_paths, dtype=np.int64).reshape(len(out_paths), T)
    return PathSet(paths, np.array(out_costs, dtype=float), commodity)


# --------------------------------------------------------------------------- simplex


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    iterations: int


def _pivot(tab: np.ndarray, r: int, c: int) -> None:
    tab[r] /= tab[r, c]
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _run(tab: np.ndarray, basis: list, allowed: np.ndarray, tol: float, max_iter: int) -> int:
    """Minimize the objective in the last row of ``tab`` with Bland's rule."""
    m = tab.shape[0] - 1
    for it in range(max_iter):
        red = tab[-1, :-1]
        cand = np.flatnonzero((red < -tol) & allowed)
        if cand.size == 0:
            return it
        c = int(cand[0])
        col = tab[:m, c]
        pos = col > tol
        if not pos.any():
            raise RuntimeError("LP unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        r = int(min(ties, key=lambda k: basis[k]))
        _pivot(tab, r, c)
        basis[r] = c
    raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, tol: float = 1e-9,
            max_iter: int = 100000) -> SimplexResult:
    """Two-phase dense-tableau simplex for ``min c x`` s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    nv = c.size
    A_eq = np.zeros((0, nv)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nv)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, nv)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nv)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    me, mu = A_eq.shape[0], A_ub.shape[0]
    m = me + mu
    # columns: original, slacks, artificials
    A = np.zeros((m, nv + mu))
    A[:me, :nv] = A_eq
    A[me:, :nv] = A_ub
    A[me:, nv:] = np.eye(mu)
    b = np.concatenate([b_eq, b_ub])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    ncol = nv + mu
    tab = np.zeros((m + 1, ncol + m + 1))
    tab[:m, :ncol] = A
    tab[:m, ncol:ncol + m] = np.eye(m)
    tab[:m, -1] = b
    basis = list(range(ncol, ncol + m))
    tab[-1, :ncol] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    allowed = np.ones(ncol + m, dtype=bool)
    iters = _run(tab, basis, allowed, tol, max_iter)
    scale = max(1.0, float(np.abs(b).sum()))
    if -tab[-1, -1] > tol * scale:
        raise LPInfeasibleError(-tab[-1, -1])
    # drive artificials out of the basis; rows where that is impossible are redundant
    keep = []
    for r in range(m):
        if basis[r] >= ncol:
            nz = np.flatnonzero(np.abs(tab[r, :ncol]) > tol)
            if nz.size:
                _pivot(tab, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    tab = np.vstack([tab[keep], tab[-1:]])
    basis = [basis[r] for r in keep]
    tab = np.delete(tab, np.s_[ncol:ncol + m], axis=1)
    cost = np.concatenate([c, np.zeros(mu)])
    tab[-1, :] = 0.0
    tab[-1, :ncol] = cost
    for r, j in enumerate(basis):
        tab[-1] -= cost[j] * tab[r]
    iters += _run(tab, basis, np.ones(ncol, dtype=bool), tol, max_iter)
    x = np.zeros(ncol)
    for r, j in enumerate(basis):
        x[j] = tab[r, -1]
    x = np.maximum(x[:nv], 0.0)
    return SimplexResult(x, float(c @ x), iters)


# --------------------------------------------------------------------------- exact LPs


@dataclass
class LPResult:
    value: float
    flows: list
    paths: list


def _commodities(problem) -> int:
    return 1 if isinstance(problem, SingleCommodityProblem) else problem.L


def solve_exact_lp(problem, cap: int = MAX_LP_PATHS) -> LPResult:
    """Path-flow LP: supplies and demands per commodity, shared capacities on ``t = 2..T-1``."""
    L, T, n = _commodities(problem), problem.T, problem.n
    total = sum(count_paths(problem, ell) for ell in range(L))
    if total > cap:
        raise OracleCapError(f"{total} paths exceed the LP cap of {cap}")
    sets = [enumerate_paths(problem, ell) for ell in range(L)]
    offsets = np.cumsum([0] + [len(s) for s in sets])
    nv = int(offsets[-1])
    cost = np.concatenate([s.costs for s in sets]) if nv else np.zeros(0)
    rows_eq, b_eq = [], []
    for ell, s in enumerate(sets):
        src, snk = _targets(problem, ell)
        for t_idx, target in ((0, src), (T - 1, snk)):
            for i in range(n):
                row = np.zeros(nv)
                hit = s.paths[:, t_idx] == i if len(s) else np.zeros(0, bool)
                row[offsets[ell]:offsets[ell + 1]] = hit
                if target[i] > 0 or hit.any():
                    rows_eq.append(row)
                    b_eq.append(target[i])
    rows_ub, b_ub = [], []
    for t in range(2, T):
        d = problem.d[t - 2]
        for i in range(n):
            if not np.isfinite(d[i]):
                continue
            row = np.zeros(nv)
            for ell, s in enumerate(sets):
                if len(s):
                    row[offsets[ell]:offsets[ell + 1]] = s.paths[:, t - 1] == i
            if row.any():
                rows_ub.append(row)
                b_ub.append(d[i])
    res = simplex(cost, np.array(rows_eq).reshape(-1, nv), np.array(b_eq),
                  np.array(rows_ub).reshape(-1, nv), np.array(b_ub))
    flows = [res.x[offsets[ell]:offsets[ell + 1]] for ell in range(L)]
    return LPResult(res.value, flows, sets)


def solve_node_edge_lp(problem) -> float:
    """Optimum of the arc formulation on the time-expanded state graph (same simplex)."""
    L, T, n = _commodities(problem), problem.T, problem.n
    arcs = []  # (commodity, t, i, j, cost)
    for ell in range(L):
        sc = _state_costs(problem, ell)
        for t in range(1, T):
            for i, j, v in problem.structure_at(t).triplets():
                arcs.append((ell, t, i, j, v + sc[t, j] + (sc[0, i] if t == 1 else 0.0)))
    nv = len(arcs)
    if nv * (L * n * T) > MAX_TENSOR:
        raise OracleCapError("time-expanded LP too large for the oracle")
    cost = np.array([a[4] for a in arcs])
    eq, beq = [], []
    for ell in range(L):
        src, snk = _targets(problem, ell)
        for t in range(1, T + 1):
            for i in range(n):
                row = np.zeros(nv)
                for k, (l2, s, a, b, _) in enumerate(arcs):
                    if l2 != ell:
                        continue
                    if s == t and a == i:
                        row[k] += 1.0      # outflow
                    if s == t - 1 and b == i:
                        row[k] -= 1.0      # inflow
                if t == 1:
                    rhs = src[i]
                elif t == T:
                    row = -row
                    rhs = snk[i]
                else:
                    rhs = 0.0
                if row.any() or rhs:
                    eq.append(row)
                    beq.append(rhs)
    ub, bub = [], []
    for t in range(2, T):
        for i in range(n):
            d = problem.d[t - 2, i]
            if not np.isfinite(d):
                continue
            row = np.array([1.0 if (s == t - 1 and b == i) else 0.0 for (_, s, _, b, _) in arcs])
            if row.any():
                ub.append(row)
                bub.append(d)
    res = simplex(cost, np.array(eq).reshape(-1, nv), np.array(beq),
                  np.array(ub).reshape(-1, nv), np.array(bub))
    return res.value


# --------------------------------------------------------------------------- dense tensors


@dataclass
class DenseTensor:
    """Full plan tensor; with ``commodity_axis`` the first axis indexes commodities."""

    values: np.ndarray
    commodity_axis: bool = False

    def axis(self, t: int) -> int:
        """Array axis of time ``t`` (1-based); ``t = 0`` is the commodity axis."""
        if t == 0:
            if not self.commodity_axis:
                raise ValueError("tensor has no commodity axis")
            return 0
        return t if self.commodity_axis else t - 1

    @property
    def T(self) -> int:
        return self.values.ndim - int(self.commodity_axis)


def check_tensor_size(L: int, n: int, T: int, cap: int = MAX_TENSOR) -> None:
    size = L * n**T
    if size > cap:
        raise OracleCapError(f"dense tensor with {size} entries exceeds the cap of {cap}")


def _on_axes(arr: np.ndarray, axes: tuple, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    for a, s in zip(axes, arr.shape):
        shape[a] = s
    return arr.reshape(shape)


def kernel_tensor(problem) -> DenseTensor:
    """``K`` as a dense tensor (state costs, commodity costs and transitions)."""
    T, n, eps = problem.T, problem.n, problem.epsilon
    multi = isinstance(problem, MultiCommodityProblem)
    L = problem.L if multi else 1
    check_tensor_size(L, n, T)
    ndim = T + int(multi)
    out = DenseTensor(np.ones([L] * multi + [n] * T), multi)
    v = out.values
    for t in range(1, T):
        K = np.exp(-_dense_costs_at(problem, t) / eps)
        v *= _on_axes(K, (out.axis(t), out.axis(t + 1)), ndim)
    if multi:
        KL = np.exp(-problem.C_L / eps)
        for t in range(2, T):
            v *= _on_axes(KL, (0, out.axis(t)), ndim)
    else:
        k = np.exp(-problem.c / eps)
        for t in range(1, T + 1):
            v *= _on_axes(k, (out.axis(t),), ndim)
    return out


def _dense_costs_at(problem, t: int) -> np.ndarray:
    return problem.structure_at(t).to_dense()


def dense_projection(tensor, t):
    """Literal marginal (``t`` an int) or bi-marginal (``t = (t1, t2)``) of a tensor.

    Times are 1-based; ``0`` names the commodity axis of a :class:`DenseTensor`.
    A bare array is treated as a tensor without commodity axis.
    """
    if not isinstance(tensor, DenseTensor):
        tensor = DenseTensor(np.asarray(tensor, dtype=float))
    if tensor.values.size > MAX_TENSOR:
        raise OracleCapError("tensor exceeds the oracle cap")
    keep = (t,) if np.isscalar(t) else tuple(t)
    axes = [tensor.axis(s) for s in keep]
    other = tuple(a for a in range(tensor.values.ndim) if a not in axes)
    out = tensor.values.sum(axis=other)
    # sum keeps remaining axes in increasing order; reorder to the requested order
    order = np.argsort(np.argsort(axes))
    return np.transpose(out, order) if out.ndim > 1 else out


def scaling_tensor(problem, scalings: dict) -> DenseTensor:
    """``U`` from scalings: ``{"u": (T, n)}`` for one commodity, or
    ``{"U01", "U0T", "u": (T-2, n)}`` for several."""
    T, n = problem.T, problem.n
    multi = isinstance(problem, MultiCommodityProblem)
    L = problem.L if multi else 1
    ndim = T + int(multi)
    out = DenseTensor(np.ones([L] * multi + [n] * T), multi)
    if multi:
        out.values *= _on_axes(scalings["U01"], (0, out.axis(1)), ndim)
        out.values *= _on_axes(scalings["U0T"], (0, out.axis(T)), ndim)
        for t in range(2, T):
            out.values *= _on_axes(scalings["u"][t - 2], (out.axis(t),), ndim)
    else:
        for t in range(1, T + 1):
            out.values *= _on_axes(scalings["u"][t - 1], (out.axis(t),), ndim)
    return out


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _capped(d, a):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(a > 0, np.minimum(d / np.where(a > 0, a, 1.0), 1.0), 1.0)
    return np.where(d > 0, r, 0.0)


def dense_sinkhorn(problem, sweeps: int) -> list:
    """Cyclic Sinkhorn by full-tensor summation, in the structured solvers' block order.

    Returns the scalings after every sweep (a list of dicts of arrays).
    """
    T = problem.T
    Kt = kernel_tensor(problem)
    multi = isinstance(problem, MultiCommodityProblem)
    d = problem.d
    if multi:
        sc = {"U01": (problem.R01 > 0).astype(float), "U0T": (problem.R0T > 0).astype(float),
              "u": (d > 0).astype(float)}
    else:
        u = np.ones((T, problem.n))
        u[0] = problem.mu_1 > 0
        u[-1] = problem.mu_T > 0
        u[1:T - 1] = d > 0
        sc = {"u": u}

    def without(key, t=None):
        # projection of K ⊙ U with the block being updated set to one
        trial = {k: v.copy() for k, v in sc.items()}
        if key == "u" and multi:
            trial["u"][t - 2] = 1.0
        elif key == "u":
            trial["u"][t - 1] = 1.0
        else:
            trial[key] = np.ones_like(trial[key])
        M = DenseTensor(Kt.values * scaling_tensor(problem, trial).values, multi)
        return M

    history = []
    for _ in range(sweeps):
        if multi:
            sc["U01"] = _ratio(problem.R01, dense_projection(without("U01"), (0, 1)))
            for t in range(2, T):
                sc["u"][t - 2] = _capped(d[t - 2], dense_projection(without("u", t), t))
            sc["U0T"] = _ratio(problem.R0T, dense_projection(without("U0T"), (0, T)))
        else:
            sc["u"][0] = _ratio(problem.mu_1, dense_projection(without("u", 1), 1))
            for t in range(2, T):
                sc["u"][t - 1] = _capped(d[t - 2], dense_projection(without("u", t), t))
            sc["u"][T - 1] = _ratio(problem.mu_T, dense_projection(without("u", T), T))
        history.append({k: v.copy() for k, v in sc.items()})
    return history


def dense_plan(problem, scalings: dict) -> DenseTensor:
    """``K ⊙ U`` for the given scalings."""
    K = kernel_tensor(problem)
    return DenseTensor(K.values * scaling_tensor(problem, scalings).values, K.commodity_axis)


def dense_cost_tensor(problem) -> DenseTensor:
    """Path cost of every cell (``inf`` off the support)."""
    T, n = problem.T, problem.n
    multi = isinstance(problem, MultiCommodityProblem)
    L = problem.L if multi else 1
    check_tensor_size(L, n, T)
    ndim = T + int(multi)
    out = DenseTensor(np.zeros([L] * multi + [n] * T), multi)
    for t in range(1, T):
        out.values = out.values + _on_axes(_dense_costs_at(problem, t), (out.axis(t), out.axis(t + 1)), ndim)
    if multi:
        for t in range(2, T):
            out.values = out.values + _on_axes(problem.C_L, (0, out.axis(t)), ndim)
    else:
        for t in range(1, T + 1):
            out.values = out.values + _on_axes(problem.c, (out.axis(t),), ndim)
    return out


def dense_entropy(M: np.ndarray) -> float:
    """``sum_{M > 0} (M log M + M - 1)``."""
    M = np.asarray(M, dtype=float)
    pos = M[M > 0]
    return float(np.sum(pos * np.log(pos) + pos - 1.0))


# --------------------------------------------------------------------------- tiny random instances


def random_structure(rng, n: int, density: float = 0.5, scale: float = 1.0) -> StructureMatrix:
    """Random support with nonnegative costs.

    The diagonal and the cycle ``i -> i + 1`` are always present, so every
    state can reach every other one.
    """
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, True)
    mask[np.arange(n), (np.arange(n) + 1) % n] = True
    return StructureMatrix.from_dense(np.where(mask, rng.random((n, n)) * scale, np.inf))


def random_tiny(rng, n: int = 4, T: int = 4, L: int | None = None, epsilon: float = 0.5,
                density: float = 0.5, cap: float = 0.6, time_varying: bool = False, attempts: int = 200):
    """Feasible tiny instance: single commodity when ``L`` is None, else ``L`` commodities.

    Total mass is one and every interior state has capacity ``cap``.  Draws
    are repeated until the time-expanded LP is feasible, so the capacities
    may bind but never make the instance infeasible.
    """
    if T > 2 and cap * n < 1.0:
        raise ValueError(f"capacity {cap} on {n} states cannot carry unit mass")
    for _ in range(attempts):
        p = _draw_tiny(rng, n, T, L, epsilon, density, cap, time_varying)
        try:
            solve_node_edge_lp(p)
        except LPInfeasibleError:
            continue
        return p
    raise ValueError(f"no feasible instance in {attempts} draws")


def _draw_tiny(rng, n, T, L, epsilon, density, cap, time_varying):
    structure = (tuple(random_structure(rng, n, density) for _ in range(T - 1))
                 if time_varying else random_structure(rng, n, density))
    d = np.full((T - 2, n), cap)
    if L is None:
        mu_1 = rng.random(n) + 0.1
        mu_T = rng.random(n) + 0.1
        return SingleCommodityProblem(structure, rng.random(n) * 0.5, mu_1 / mu_1.sum(), mu_T / mu_T.sum(),
                                      d, T, epsilon)
    R01 = rng.random((L, n)) * (rng.random((L, n)) < 0.7) + 1e-3 * np.eye(L, n)
    R01 /= R01.sum()
    R0T = rng.random((L, n)) + 0.05
    R0T *= (R01.sum(axis=1) / R0T.sum(axis=1))[:, None]
    return MultiCommodityProblem(structure, rng.random((L, n)), R01, R0T, d, T, epsilon)
