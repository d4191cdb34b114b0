"""A scikit-learn style front end over the two scaling solvers."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import sinkhorn_multi, sinkhorn_path
from .problems import MultiCommodityProblem, SingleCommodityProblem, check_problem, with_epsilon


def solve(problem, tol: float = 1e-8, max_sweeps: int = 1000, trace_updates: bool = False):
    """Dispatch to the single- or multi-commodity solver; returns ``(state, report)``."""
    if isinstance(problem, SingleCommodityProblem):
        return sinkhorn_path.solve(problem, tol, max_sweeps, trace_updates)
    if isinstance(problem, MultiCommodityProblem):
        return sinkhorn_multi.solve(problem, tol, max_sweeps, trace_updates)
    raise TypeError(f"expected a problem instance, got {type(problem).__name__}")


def solver_module(state):
    if isinstance(state, sinkhorn_path.PathScalingState):
        return sinkhorn_path
    return sinkhorn_multi


class DynamicFlowSolver(BaseEstimator):
    """Entropy-regularized dynamic flow solver.

    Parameters
    ----------
    epsilon : float or None
        Regularization; ``None`` keeps the value stored in the problem.
    tol : float
        Stop once the constraint error relative to the total mass is below this.
    max_sweeps : int
        Sweep cap.  Hitting it leaves ``converged_`` false.

    Attributes
    ----------
    state_ : scaling state after the last sweep
    report_ : SolveReport
    flows_ : FlowSolution
    converged_ : bool
    """

    def __init__(self, epsilon=None, tol=1e-8, max_sweeps=1000):
        self.epsilon = epsilon
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, problem, y=None):
        check_problem(problem)
        if self.epsilon is not None:
            problem = with_epsilon(problem, self.epsilon)
        self.state_, self.report_ = solve(problem, self.tol, self.max_sweeps)
        self.flows_ = solver_module(self.state_).extract_flows(self.state_)
        self.converged_ = self.report_.converged
        self.n_sweeps_ = self.report_.sweeps
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("call fit before using the solver")

    def transform(self, problem=None):
        """Per-time aggregate occupancy ``(T, n)`` of the fitted plan."""
        self._check_fitted()
        return self.flows_.marginals

    def fit_transform(self, problem, y=None):
        return self.fit(problem).transform()

    def score(self, problem, y=None) -> float:
        """Negative constraint error of the fitted plan (higher is better)."""
        self._check_fitted()
        return -self.report_.final_error
