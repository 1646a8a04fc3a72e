"""scikit-learn style front end.

The samples ``X`` are ensemble indices ``theta`` (one per row) and
``sample_weight`` their probabilities. ``fit`` solves the averaged problem
for that discrete measure; ``predict`` returns each member's total cost
under the fitted control; ``score`` is the negated averaged cost, so
out-of-sample evaluation with ``cross_val_score`` measures how well a
control fitted on some draws does on others.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import _check_sample_weight, check_array, check_is_fitted

from .costs import averaged_cost, total_costs_batch
from .exceptions import InputError
from .measures import DiscreteMeasure
from .solvers import solve
from .systems import rollout_batch


class EnsembleOptimalControl(BaseEstimator):
    """Fit a shared control sequence to an ensemble sample.

    Parameters
    ----------
    problem : EnsembleProblem
        Dynamics, costs, horizon.
    solver : {"lq_exact", "nelder_mead", "fd_gradient"}
    solver_options : dict, optional
        Passed to the solver.

    Attributes
    ----------
    control_ : ndarray of shape (horizon, m)
    value_ : float
        Averaged cost of ``control_`` on the training measure.
    report_ : SolveReport
    """

    def __init__(self, problem=None, solver="lq_exact", solver_options=None):
        self.problem = problem
        self.solver = solver
        self.solver_options = solver_options

    def _measure(self, X, sample_weight):
        if self.problem is None:
            raise InputError("estimator has no problem")
        X = check_array(X, ensure_2d=True, dtype=float)
        p = self.problem.system.theta_space.dimension
        if X.shape[1] != p:
            raise InputError(f"X has {X.shape[1]} columns, theta dimension is {p}")
        w = _check_sample_weight(sample_weight, X)
        if np.any(w < 0) or w.sum() <= 0:
            raise InputError("sample_weight must be nonnegative with a positive sum")
        return DiscreteMeasure(X, w / w.sum())

    def fit(self, X, y=None, sample_weight=None):
        mu = self._measure(X, sample_weight)
        self.report_ = solve(self.problem, mu, self.solver, **(self.solver_options or {}))
        self.control_ = self.report_.minimiser
        self.value_ = self.report_.value
        self.n_features_in_ = mu.dimension
        return self

    def predict(self, X):
        """Total cost of each ensemble member under ``control_``."""
        check_is_fitted(self, "control_")
        X = self._measure(X, None).atoms
        return total_costs_batch(self.problem, self.control_, X)[0]

    def transform(self, X):
        """Flattened trajectories, one row of ``(horizon + 1) * n`` states per theta."""
        check_is_fitted(self, "control_")
        X = self._measure(X, None).atoms
        states = rollout_batch(self.problem.system, self.problem.x0_map, self.control_, X)
        return states.reshape(states.shape[0], -1)

    def score(self, X, y=None, sample_weight=None):
        check_is_fitted(self, "control_")
        return -averaged_cost(self.problem, self.control_, self._measure(X, sample_weight))
