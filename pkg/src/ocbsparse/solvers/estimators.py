"""scikit-learn style estimators over the solver functions.

``X`` plays the role of the basis matrix ``A`` (M samples by N atoms) and ``y``
is the data vector. ``predict`` returns the representation ``X @ coef_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ..core import ProblemInstance, ls_refit_arrays
from ..validation import rate_to_count
from .amp import amp_arrays
from .exhaustive import DEFAULT_BUDGET, exhaustive_search
from .lasso import lasso_arrays
from .omp import omp_arrays


class _SparseRegressor(RegressorMixin, BaseEstimator):
    def _finish(self, X, y, coef, n_iter):
        self.coef_ = coef
        self.support_ = coef != 0
        self.n_iter_ = int(n_iter)
        res = y - X @ coef
        self.distortion_ = float(res @ res) / (2 * X.shape[0])
        self.rate_ = float(self.support_.sum()) / X.shape[0]
        return self

    def _check(self, X, y):
        return validate_data(self, X, y, y_numeric=True, dtype=float)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False, dtype=float)
        return X @ self.coef_


class LassoCD(_SparseRegressor):
    """LASSO by coordinate descent, optionally followed by an LS refit on its support.

    Parameters
    ----------
    lam : float
        Regularization coefficient.
    refit : bool
        Replace the shrunk coefficients by the least-squares fit on their support.
    tol : float
        KKT residual bound.
    max_sweeps : int
    """

    def __init__(self, lam=1.0, refit=False, tol=1e-9, max_sweeps=100_000):
        self.lam = lam
        self.refit = refit
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y):
        X, y = self._check(X, y)
        coef, sweeps, kkt = lasso_arrays(X, y, self.lam, self.tol, self.max_sweeps)
        self.kkt_residual_ = kkt
        self.lasso_coef_ = coef.copy()
        if self.refit:
            idx = np.flatnonzero(coef)
            coef = np.zeros_like(coef)
            coef[idx] = ls_refit_arrays(X, y, idx)
        return self._finish(X, y, coef, sweeps)


class ApproximateMessagePassing(_SparseRegressor):
    """Damped AMP for the LASSO, optionally followed by an LS refit."""

    def __init__(self, lam=1.0, delta=0.5, tol=1e-10, max_iter=100_000, refit=False):
        self.lam = lam
        self.delta = delta
        self.tol = tol
        self.max_iter = max_iter
        self.refit = refit

    def fit(self, X, y):
        X, y = self._check(X, y)
        coef, chi, _, _, it = amp_arrays(X, y, self.lam, self.delta, self.tol, self.max_iter)
        self.chi_ = float(chi)
        if self.refit:
            idx = np.flatnonzero(coef)
            coef = np.zeros_like(coef)
            coef[idx] = ls_refit_arrays(X, y, idx)
        return self._finish(X, y, coef, it)


class OrthogonalMatchingPursuit(_SparseRegressor):
    """OMP with ``r * M`` greedy steps."""

    def __init__(self, r=0.5):
        self.r = r

    def fit(self, X, y):
        X, y = self._check(X, y)
        k = rate_to_count(self.r, X.shape[0])
        coef = omp_arrays(X, y, k)
        return self._finish(X, y, coef, k)


class ExhaustiveL0(_SparseRegressor):
    """Best support of size ``r * M`` by full enumeration.

    ``histogram_`` keeps the distortion of every enumerated support.
    """

    def __init__(self, r=0.5, budget=DEFAULT_BUDGET):
        self.r = r
        self.budget = budget

    def fit(self, X, y):
        X, y = self._check(X, y)
        inst = ProblemInstance.from_arrays(y, X)
        sol, hist = exhaustive_search(inst, self.r, budget=self.budget)
        self.histogram_ = hist
        return self._finish(X, y, np.array(sol.x), hist.total)
