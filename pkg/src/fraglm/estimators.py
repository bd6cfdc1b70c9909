"""Scikit-learn style wrappers around the functional regression fits.

Each estimator takes ``X`` as an ``(n_samples, n_grid_points)`` array of curve
values on an equally spaced grid over ``[t_min, t_max]``, with NaN marking
unobserved points, and a response vector ``y``.

Examples
--------
>>> from fraglm.simulation import ScenarioConfig, generate
>>> data, truth = generate(ScenarioConfig(n=100, replications=1), 0)
>>> est = NMERegressor().fit(data.values, data.responses)
>>> est.predict(data.values).shape
(100,)
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import fit_in, fit_ori, fit_sub, fragment_scores
from .core import FunctionalDataset, make_grid
from .eigen import complete_scores
from .exceptions import InvalidArgumentError
from .nme import AUTO, RidgeCompletionConfig, complete_missing_scores, fit_nme, reconstruct_curve
from .wme import Bandwidths, fit_wme, pace_scores, smooth_moments

__all__ = [
    "ORIRegressor",
    "SUBRegressor",
    "NMERegressor",
    "WMERegressor",
    "INRegressor",
]


class _FunctionalRegressor(TransformerMixin, RegressorMixin, BaseEstimator):
    """Shared fit/predict/transform logic.

    Subclasses implement ``_fit_dataset`` (returns a ``FitResult``) and
    ``_scores`` (scores of new curves against the fitted eigensystem).

    Attributes
    ----------
    grid_ : GridDomain
        Evaluation grid inferred from ``X.shape[1]``.
    coef_ : ndarray of shape (n_grid_points,)
        Estimated slope function on the grid.
    coefficients_ : ndarray of shape (n_components_,)
        Slope coefficients in the eigenbasis.
    intercept_ : float
        ``mean(y) - <coef_, mean_>``.
    mean_, eigenvalues_, eigenfunctions_ : ndarray
        Fitted mean function and eigen-pairs (one eigenfunction per row).
    n_components_ : int
        Truncation level actually used.
    scores_ : ndarray of shape (n_samples, n_components_)
        Scores of the training curves.
    result_ : FitResult
        Full fit including pipeline diagnostics.
    """

    def __init__(self, t_min=0.0, t_max=1.0, fve_threshold=0.95, n_components=None, noisy=False):
        self.t_min = t_min
        self.t_max = t_max
        self.fve_threshold = fve_threshold
        self.n_components = n_components
        self.noisy = noisy

    def _dataset(self, X, y=None, reset=False):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan", ensure_min_features=2)
        if reset:
            self.n_features_in_ = X.shape[1]
            self.grid_ = make_grid(self.t_min, self.t_max, X.shape[1])
        elif X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"X has {X.shape[1]} grid points, the estimator was fit on {self.n_features_in_}"
            )
        if y is None:
            y = np.zeros(X.shape[0])
        if X.shape[0] == 1:
            # datasets need two curves; score a duplicated row and keep one
            X, y = np.vstack([X, X]), np.r_[y, y]
        return FunctionalDataset(self.grid_, X, np.isfinite(X), y, self.noisy)

    def fit(self, X, y):
        """Fit the slope function.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_grid_points)
            Curve values, NaN where unobserved.
        y : array-like of shape (n_samples,)
            Scalar responses.

        Returns
        -------
        self
        """
        y = check_array(y, ensure_2d=False, dtype=float).ravel()
        dataset = self._dataset(X, y, reset=True)
        result = self._fit_dataset(dataset)
        est = result.estimate
        self.result_ = result
        self.n_components_ = est.m
        self.coef_ = np.array(est.gamma)
        self.coefficients_ = np.array(est.coefficients)
        self.intercept_ = est.intercept
        self.y_mean_ = float(dataset.responses.mean())
        self.mean_ = np.array(result.system.mean)
        self.eigenvalues_ = np.array(result.system.eigenvalues)
        self.eigenfunctions_ = np.array(result.system.eigenfunctions)
        self.scores_ = np.asarray(result.scores)[:, : est.m]
        return self

    def transform(self, X):
        """Principal component scores of the curves in ``X``."""
        check_is_fitted(self, "result_")
        n = np.shape(X)[0]
        return self._scores(self._dataset(X))[:n, : self.n_components_]

    def predict(self, X):
        """Predicted responses ``mean(y) + scores @ coefficients_``."""
        check_is_fitted(self, "result_")
        return self.y_mean_ + self.transform(X) @ self.coefficients_

    def _fit_dataset(self, dataset):  # pragma: no cover - abstract
        raise NotImplementedError

    def _scores(self, dataset):  # pragma: no cover - abstract
        raise NotImplementedError


class ORIRegressor(_FunctionalRegressor):
    """Classical FPCA regression; every curve must be fully observed."""

    def _fit_dataset(self, dataset):
        return fit_ori(dataset, self.fve_threshold, self.n_components)

    def _scores(self, dataset):
        return complete_scores(dataset, self.result_.system, self.n_components_)


class SUBRegressor(ORIRegressor):
    """FPCA regression on the fully observed curves only.

    Incomplete training curves are dropped. ``predict`` and ``transform``
    still require fully observed curves.
    """

    def _fit_dataset(self, dataset):
        return fit_sub(dataset, self.fve_threshold, self.n_components)


class NMERegressor(_FunctionalRegressor):
    """Regression on fragments with ridge completion of the missing scores.

    Parameters
    ----------
    rho : float or "auto", default="auto"
        Ridge parameter; "auto" picks it by GCV on the complete curves.
    rho_grid : sequence of float, optional
        GCV candidates. Defaults to 8 log-spaced values in
        ``[1e-6 * lambda_1, lambda_1]``.
    min_complete_for_gcv : int, default=5
        Fewer complete curves than this fall back to the median candidate.

    Attributes
    ----------
    rho_ : float
        Ridge parameter used for the training (and any new) curves.
    """

    def __init__(
        self,
        t_min=0.0,
        t_max=1.0,
        fve_threshold=0.95,
        n_components=None,
        noisy=False,
        rho=AUTO,
        rho_grid=None,
        min_complete_for_gcv=5,
    ):
        super().__init__(t_min, t_max, fve_threshold, n_components, noisy)
        self.rho = rho
        self.rho_grid = rho_grid
        self.min_complete_for_gcv = min_complete_for_gcv

    def _ridge(self, rho=None):
        return RidgeCompletionConfig(
            self.rho if rho is None else rho, self.rho_grid, self.min_complete_for_gcv
        )

    def _fit_dataset(self, dataset):
        result = fit_nme(dataset, self.fve_threshold, self._ridge(), self.n_components)
        rho = result.diagnostics["rho"]
        if rho is None:
            # no incomplete training curve, so no rho was needed; keep the
            # same fallback GCV would have used for new fragments
            rho = float(np.median(self._ridge().candidates(result.system.eigenvalues[0])))
            if self.rho != AUTO:
                rho = float(self.rho)
        self.rho_ = rho
        return result

    def _scores(self, dataset):
        moments = self.result_.diagnostics["moments"]
        completed = complete_missing_scores(
            dataset, moments, self.result_.system, self.n_components_, self._ridge(self.rho_)
        )
        return completed.total

    def reconstruct(self, X):
        """Rank-``n_components_`` reconstructions of the curves on the full grid."""
        return reconstruct_curve(self.result_.system, self.transform(X), self.n_components_)


class _SmoothedRegressor(_FunctionalRegressor):
    def __init__(
        self,
        t_min=0.0,
        t_max=1.0,
        fve_threshold=0.95,
        n_components=None,
        noisy=True,
        kernel="epanechnikov",
        h_mu=None,
        h_c=None,
    ):
        super().__init__(t_min, t_max, fve_threshold, n_components, noisy)
        self.kernel = kernel
        self.h_mu = h_mu
        self.h_c = h_c

    def _smoothed(self, dataset):
        smoothed = smooth_moments(
            dataset, self.kernel, Bandwidths.resolve(dataset, self.h_mu, self.h_c)
        )
        self.noise_variance_ = smoothed.noise.sigma2
        self.bandwidths_ = smoothed.bandwidths
        return smoothed


class WMERegressor(_SmoothedRegressor):
    """Regression on noisy fragments with conditional-expectation scores.

    Parameters
    ----------
    kernel : {"epanechnikov", "quartic", "triangular", "uniform"}
        Smoothing kernel.
    h_mu, h_c : float, optional
        Mean and covariance bandwidths. Rule-of-thumb values when None.

    Attributes
    ----------
    noise_variance_ : float
        Estimated measurement-error variance.
    bandwidths_ : Bandwidths
    """

    def _fit_dataset(self, dataset):
        return fit_wme(
            dataset,
            fve_threshold=self.fve_threshold,
            n_components=self.n_components,
            smoothed=self._smoothed(dataset),
        )

    def _scores(self, dataset):
        smoothed = self.result_.diagnostics["smoothed"]
        return pace_scores(dataset, self.result_.system, self.n_components_, cov=smoothed.cov.values)


class INRegressor(_SmoothedRegressor):
    """Smoothed moments as in :class:`WMERegressor`, fragment-integral scores."""

    def _fit_dataset(self, dataset):
        return fit_in(
            dataset,
            fve_threshold=self.fve_threshold,
            n_components=self.n_components,
            smoothed=self._smoothed(dataset),
        )

    def _scores(self, dataset):
        return fragment_scores(dataset, self.result_.system, self.n_components_)
