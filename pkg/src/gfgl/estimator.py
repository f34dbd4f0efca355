"""scikit-learn style wrapper around the ADMM solver."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import TimeSeries, gfgl_objective, local_covariances
from .segmentation import block_precisions
from .solver import SolverConfig, admm_solve


def check_series(X, min_features=2):
    """Validate a (T, p) time series and return it as a TimeSeries.

    Non-finite entries are reported by (1-based) row and column.
    """
    if isinstance(X, TimeSeries):
        return X
    arr = check_array(X, dtype=np.float64, ensure_all_finite=False,
                      ensure_min_samples=1, ensure_min_features=min_features)
    return TimeSeries(arr)


def check_penalties(lambda1, lambda2):
    if not np.isfinite(lambda1) or lambda1 <= 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    if not np.isfinite(lambda2) or lambda2 < 0:
        raise ValueError(f"lambda2 must be nonnegative, got {lambda2}")


class GroupFusedGraphicalLasso(BaseEstimator):
    """Piecewise-constant sparse precision matrices for a multivariate
    time series.

    Rows of ``X`` are time points. The fit minimises the Gaussian
    negative log-likelihood of each observation under its own precision
    matrix, with an l1 penalty on off-diagonal entries and a Frobenius
    penalty on the change between consecutive matrices, so the estimate
    is constant between a sparse set of changepoints.

    Parameters
    ----------
    lambda1 : float
        Sparsity penalty, must be positive.
    lambda2 : float
        Fusion penalty. Larger values give fewer changepoints.
    gamma_v1, gamma_v2, gamma_w : float
        ADMM step weights.
    tol_primal, tol_dual : float
        Residual tolerances.
    max_iter : int
    threads : int
        Worker threads for the per-time eigen updates (results do not
        depend on this).
    block_restart : int
        Number of iterations with an unchanged changepoint pattern after
        which the solver jumps to the exact solution for that pattern.
        0 runs plain ADMM, which can need many thousands of iterations
        for long series.
    adapt_every : int
        Rebalance the step weights against the residuals every this many
        iterations; 0 keeps them fixed.

    Attributes
    ----------
    precision_ : ndarray of shape (T, p, p)
    changepoints_ : tuple of int
        1-based times at which a new block starts.
    block_precisions_ : ndarray of shape (n_blocks, p, p)
    segmentation_ : Segmentation
    result_ : SolveResult
    n_iter_ : int
    converged_ : bool
    objective_ : float
    """

    def __init__(self, lambda1=0.1, lambda2=1.0, *, gamma_v1=1.0, gamma_v2=1.0, gamma_w=1.0,
                 tol_primal=1e-5, tol_dual=1e-5, max_iter=2000, threads=1, block_restart=5, adapt_every=10):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.gamma_v1 = gamma_v1
        self.gamma_v2 = gamma_v2
        self.gamma_w = gamma_w
        self.tol_primal = tol_primal
        self.tol_dual = tol_dual
        self.max_iter = max_iter
        self.threads = threads
        self.block_restart = block_restart
        self.adapt_every = adapt_every

    def _config(self):
        check_penalties(self.lambda1, self.lambda2)
        return SolverConfig.from_lambdas(
            self.lambda1, self.lambda2, gamma_v1=self.gamma_v1, gamma_v2=self.gamma_v2,
            gamma_w=self.gamma_w, tol_primal=self.tol_primal, tol_dual=self.tol_dual,
            max_iter=self.max_iter, threads=self.threads, block_restart=self.block_restart,
            adapt_every=self.adapt_every)

    def fit(self, X, y=None):
        """Estimate the precision sequence.

        Parameters
        ----------
        X : array-like of shape (T, p)
        y : ignored
        """
        series = check_series(X)
        cfg = self._config()
        res = admm_solve(local_covariances(series), cfg)
        self.n_features_in_ = series.p
        self.n_timepoints_ = series.T
        self.result_ = res
        self.precision_ = res.precisions.matrices
        self.segmentation_ = res.segmentation
        self.changepoints_ = res.segmentation.changepoints
        self.block_precisions_ = block_precisions(res.precisions, res.segmentation)
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.objective_ = res.final_objective
        return self

    def _check_same_length(self, X):
        check_is_fitted(self)
        if X is None:
            return None
        series = check_series(X)
        if series.p != self.n_features_in_:
            raise ValueError(f"X has {series.p} features, expected {self.n_features_in_}")
        if series.T != self.n_timepoints_:
            raise ValueError(f"X has {series.T} time points, the fit covers {self.n_timepoints_}")
        return series

    def predict(self, X=None):
        """Block label (0-based) of each time point of the fitted series."""
        self._check_same_length(X)
        return self.segmentation_.labels()

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()

    def transform(self, X=None):
        """Upper-triangular precision entries at each time point,
        shape (T, p (p + 1) / 2)."""
        self._check_same_length(X)
        iu = np.triu_indices(self.n_features_in_)
        return self.precision_[:, iu[0], iu[1]]

    def score(self, X, y=None):
        """Negative penalised objective of the fitted sequence on ``X``."""
        series = self._check_same_length(X)
        return -gfgl_objective(self.precision_, local_covariances(series), self._config().reg)
