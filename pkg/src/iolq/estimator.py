"""Scikit-learn style facade over the data-driven value iteration."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .plant import WeightSpec
from .vi import EscapeSets, RegressionSolver, StepSchedule, data_vi


class ValueIterationRegulator(BaseEstimator):
    """Learn an output-feedback LQ gain from collected trajectory integrals.

    ``fit`` consumes a RegressionData instance (the per-interval integral
    matrices of one excitation run) plus the known input matrix of the
    augmented coordinate, and exposes the learned quadratic value matrix and
    feedback gain as fitted attributes.
    """

    def __init__(self, q=1.0, r=1.0, delta=1e-4, max_iter=200_000,
                 step_offset=1.0, escape_scale=5.0, escape_growth=2.0,
                 rank_rcond=1e-8, allow_deficient=False):
        self.q = q
        self.r = r
        self.delta = delta
        self.max_iter = max_iter
        self.step_offset = step_offset
        self.escape_scale = escape_scale
        self.escape_growth = escape_growth
        self.rank_rcond = rank_rcond
        self.allow_deficient = allow_deficient

    def fit(self, X, y=None, *, b_zeta, p0=None):
        """Run value iteration on the regression data ``X``.

        ``b_zeta`` is the known augmented input matrix; ``p0`` optionally
        seeds the iteration (defaults to the identity).
        """
        w = WeightSpec(np.atleast_2d(self.q), np.atleast_2d(self.r))
        solver = RegressionSolver(X, b_zeta, w.q, rcond=self.rank_rcond,
                                  allow_deficient=self.allow_deficient)
        p, k, history, converged = data_vi(
            solver,
            w,
            b_zeta,
            p0=p0,
            schedule=StepSchedule(self.step_offset),
            escape=EscapeSets(self.escape_scale, self.escape_growth),
            delta=self.delta,
            max_iter=self.max_iter,
        )
        self.p_ = p
        self.gain_ = k
        self.history_ = history
        self.converged_ = converged
        self.n_iter_ = len(history.rows)
        return self

    def predict(self, X):
        """Control values -gain_ @ zeta for each row of ``X``."""
        if not hasattr(self, "gain_"):
            raise NotFittedError("call fit before predict")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return -(X @ self.gain_.T)
