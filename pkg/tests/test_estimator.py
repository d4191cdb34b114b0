import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from otflow.estimator import DynamicFlowSolver
from otflow.graph_model import ValidationError
from otflow.oracle import random_tiny


def test_fit_single_and_multi():
    for L in (None, 2):
        p = random_tiny(np.random.default_rng(0), L=L)
        est = DynamicFlowSolver(tol=1e-9, max_sweeps=5000).fit(p)
        assert est.converged_ and est.n_sweeps_ > 0
        occ = est.transform()
        assert occ.shape == (p.T, p.n)
        assert occ.sum(axis=1) == pytest.approx(np.full(p.T, p.total_mass))
        assert est.score(p) > -1e-9


def test_epsilon_override_leaves_problem_alone():
    p = random_tiny(np.random.default_rng(1))
    est = DynamicFlowSolver(epsilon=0.2, max_sweeps=3).fit(p)
    assert est.state_.epsilon == 0.2 and p.epsilon == 0.5
    assert not est.converged_


def test_unfitted():
    with pytest.raises(NotFittedError):
        DynamicFlowSolver().transform()


def test_invalid_problem():
    p = random_tiny(np.random.default_rng(1))
    p.mu_1 = p.mu_1 * 3
    with pytest.raises(ValidationError):
        DynamicFlowSolver().fit(p)


def test_clone_and_params():
    est = DynamicFlowSolver(epsilon=0.1, tol=1e-6)
    assert clone(est).get_params() == {"epsilon": 0.1, "tol": 1e-6, "max_sweeps": 1000}
