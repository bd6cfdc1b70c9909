"""Slope estimation from curve fragments observed without measurement error.

Mean and covariance are estimated from all available pairs of observed
points. The score of each incomplete curve is then split into an observed
part, integrated directly, and a missing part. The missing part is predicted
by a ridge-regularized linear functional of the observed fragment.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import _frozen, interval_weights
from .eigen import (
    CovarianceSurface,
    eigendecompose,
    fit_slope,
    select_m_fve,
    weighted_scores,
    _check_m,
)
from .exceptions import CoverageError, InvalidArgumentError, NumericError, stage

AUTO = "auto"


@dataclass(frozen=True, eq=False)
class PartialMoments:
    mean: np.ndarray
    cov: CovarianceSurface
    pointwise_counts: np.ndarray
    pairwise_counts: np.ndarray


@dataclass(frozen=True)
class RidgeCompletionConfig:
    """Ridge parameter for score completion.

    ``rho="auto"`` selects it by GCV over ``rho_grid``; when ``rho_grid`` is
    None, 8 log-spaced values from ``1e-6 * lambda_1`` to ``lambda_1`` are used.
    """

    rho: object = AUTO
    rho_grid: tuple = None
    min_complete_for_gcv: int = 5

    def __post_init__(self):
        if self.rho != AUTO:
            if not np.isscalar(self.rho) or not self.rho >= 0:
                raise InvalidArgumentError(f"rho must be >= 0 or 'auto', got {self.rho!r}")
        if self.rho_grid is not None:
            grid = tuple(float(r) for r in self.rho_grid)
            if not grid or any(r <= 0 for r in grid) or any(np.diff(grid) <= 0):
                raise InvalidArgumentError("rho_grid must be nonempty, positive and increasing")
            object.__setattr__(self, "rho_grid", grid)
        if self.min_complete_for_gcv < 1:
            raise InvalidArgumentError("min_complete_for_gcv must be >= 1")

    def candidates(self, lambda_1):
        if self.rho_grid is not None:
            return np.array(self.rho_grid)
        return lambda_1 * np.logspace(-6, 0, 8)


@dataclass(frozen=True, eq=False)
class CompletedScores:
    observed_part: np.ndarray
    missing_part: np.ndarray
    total: np.ndarray
    chosen_rho: np.ndarray
    warnings: list = field(default_factory=list)


def partial_mean(dataset):
    """Pointwise mean over the curves observed at each grid point.

    Returns ``(mean, counts)``. Only needs every grid point to be observed once.
    """
    counts = dataset.mask.sum(axis=0).astype(float)
    uncovered = np.flatnonzero(counts < 1)
    if uncovered.size:
        raise CoverageError(
            f"grid points {uncovered.tolist()} are not observed on any curve", uncovered
        )
    return dataset.filled(0.0).sum(axis=0) / counts, counts


def partial_moments(dataset):
    """Mean and covariance from all observed points and jointly observed pairs."""
    obs = dataset.mask.astype(float)
    mean, counts = partial_mean(dataset)
    centered = np.where(dataset.mask, dataset.values - mean, 0.0)
    pairs = obs.T @ obs
    thin = np.argwhere(pairs < 2)
    if thin.size:
        thin = [tuple(int(v) for v in ij) for ij in thin if ij[0] <= ij[1]]
        raise CoverageError(
            f"{len(thin)} grid pairs are jointly observed on fewer than 2 curves, "
            f"e.g. {thin[:5]}",
            thin,
        )
    cov = (centered.T @ centered) / pairs
    return PartialMoments(
        _frozen(mean),
        CovarianceSurface(dataset.grid, cov),
        _frozen(counts.astype(int), int),
        _frozen(pairs.astype(int), int),
    )


class _FragmentBlock:
    """Discretized ridge problem for one observation pattern.

    In weighted coordinates ``eta = W_O^1/2 xi`` the ridge equation reads
    ``(A + rho I) eta = B`` with ``A = W_O^1/2 C_OO W_O^1/2`` and
    ``B = W_O^1/2 C_O. (w_c * phi)``, where ``w_c`` are the weights left over
    when the fragment's own trapezoid weights are removed from the full grid
    weights. Observed and missing parts then add up to the full-grid score.
    """

    def __init__(self, cov, phi, mask, grid):
        self.index = np.flatnonzero(mask)
        w_obs = interval_weights(mask, grid.spacing)
        self.w_obs = w_obs
        self.w_miss = np.clip(grid.weights - w_obs, 0.0, None)
        self.sqrt_w = np.sqrt(w_obs[self.index])
        sw = self.sqrt_w
        a = sw[:, None] * cov[np.ix_(self.index, self.index)] * sw[None, :]
        b = sw[:, None] * (cov[self.index] @ (self.w_miss[:, None] * phi.T))
        s, v = np.linalg.eigh(a)
        # the pairwise estimator need not be positive semi-definite
        self.spectrum = np.clip(s, 0.0, None)
        self.basis = v
        self.rotated_b = v.T @ b

    def coefficients(self, rho):
        """``eta`` (one column per component) for ridge parameter ``rho``."""
        denom = self.spectrum + rho
        if np.any(denom <= 0):
            raise NumericError("ridge system is singular; use rho > 0")
        return self.basis @ (self.rotated_b / denom[:, None])

    def predict(self, centered, rho):
        """Missing-part scores for the centered curve(s) ``centered`` (``(.., p)``)."""
        r = centered[..., self.index] * self.sqrt_w
        denom = self.spectrum + rho
        if np.any(denom <= 0):
            raise NumericError("ridge system is singular; use rho > 0")
        return ((r @ self.basis) / denom) @ self.rotated_b

    def dof(self, rho):
        return float(np.sum(self.spectrum / (self.spectrum + rho)))


def ridge_function(moments, system, mask, m, rho):
    """Return the ridge solution as functions on the observed grid points.

    The result has shape ``(m, n_observed)``; the second value is the vector
    of L2(O) norms of those functions.
    """
    m = _check_m(system, m)
    block = _FragmentBlock(moments.cov.values, system.eigenfunctions[:m], mask, system.grid)
    eta = block.coefficients(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(block.sqrt_w[:, None] > 0, eta / block.sqrt_w[:, None], 0.0)
    return xi.T, np.linalg.norm(eta, axis=0)


def select_rho_gcv(dataset, moments, system, m, config=RidgeCompletionConfig()):
    """Pick the ridge parameter by GCV on the fully observed curves.

    Each complete curve borrows the mask of an incomplete curve (cycling
    through them), its masked-part scores are predicted and compared with the
    scores actually computed from the hidden values. Returns ``(rho, flags)``.
    """
    m = _check_m(system, m)
    grid = system.grid
    candidates = config.candidates(system.eigenvalues[0])
    fallback = float(np.median(candidates))
    complete = np.flatnonzero(dataset.complete)
    incomplete = np.flatnonzero(~dataset.complete)
    if incomplete.size == 0:
        return fallback, ["no incomplete curves; rho set to the median candidate"]
    if complete.size < config.min_complete_for_gcv:
        msg = (
            f"only {complete.size} complete curves (< {config.min_complete_for_gcv}); "
            "rho set to the median candidate"
        )
        return fallback, [msg]
    if candidates.size == 1:
        return float(candidates[0]), []

    phi = system.eigenfunctions[:m]
    cov = moments.cov.values
    centered = dataset.values - moments.mean
    sse = np.zeros(candidates.size)
    dof = np.zeros(candidates.size)
    for q, k in enumerate(complete):
        pattern = dataset.mask[incomplete[q % incomplete.size]]
        block = _FragmentBlock(cov, phi, pattern, grid)
        truth = (centered[k] * block.w_miss) @ phi.T
        for c, rho in enumerate(candidates):
            sse[c] += np.sum((block.predict(centered[k], rho) - truth) ** 2)
            dof[c] += block.dof(rho)
    n_c = complete.size
    # average trace of the per-pattern ridge smoothers
    shrink = 1.0 - (dof / n_c) / n_c
    with np.errstate(divide="ignore"):
        score = np.where(shrink > 0, sse / np.maximum(shrink, 1e-300) ** 2, np.inf)
    if not np.any(np.isfinite(score)):
        return float(candidates[-1]), ["GCV undefined for every candidate; largest rho used"]
    return float(candidates[int(np.argmin(score))]), []


def complete_missing_scores(dataset, moments, system, m, config=RidgeCompletionConfig()):
    """Observed-part, predicted missing-part and total scores for every curve."""
    m = _check_m(system, m)
    grid = system.grid
    phi = system.eigenfunctions[:m]
    flags = []
    if config.rho == AUTO:
        rho, flags = select_rho_gcv(dataset, moments, system, m, config)
    else:
        rho = float(config.rho)

    centered = np.where(dataset.mask, dataset.values - moments.mean, 0.0)
    weights = interval_weights(dataset.mask, grid.spacing)
    observed = weighted_scores(centered, weights, phi)
    missing = np.zeros_like(observed)
    chosen = np.zeros(dataset.n)
    cov = moments.cov.values
    for i in np.flatnonzero(~dataset.complete):
        block = _FragmentBlock(cov, phi, dataset.mask[i], grid)
        pred = block.predict(centered[i], rho)
        if not np.all(np.isfinite(pred)):
            raise NumericError(f"score completion failed for curve {i}")
        missing[i] = pred
        chosen[i] = rho
    for msg in flags:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return CompletedScores(observed, missing, observed + missing, chosen, flags)


@dataclass(frozen=True, eq=False)
class FitResult:
    """A slope estimate with the intermediate objects used to compute it."""

    estimate: object
    system: object
    scores: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def fit_nme(dataset, fve_threshold=0.95, ridge=RidgeCompletionConfig(), n_components=None):
    """Fit the slope function from fragments observed without noise.

    ``n_components`` fixes the truncation level instead of the FVE rule.
    """
    with stage("partial_moments"):
        moments = partial_moments(dataset)
    with stage("eigendecompose"):
        system = eigendecompose(moments.cov, mean=moments.mean)
    with stage("select_m"):
        m = n_components or select_m_fve(system.eigenvalues, fve_threshold)
    with stage("complete_scores"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            completed = complete_missing_scores(dataset, moments, system, m, ridge)
    with stage("fit_slope"):
        estimate = fit_slope(completed.total, dataset.responses, system, m)
    rho = float(completed.chosen_rho.max()) if (~dataset.complete).any() else None
    diagnostics = dict(moments=moments, completed=completed, rho=rho, warnings=completed.warnings)
    return FitResult(estimate, system, completed.total, diagnostics)


def reconstruct_curve(system, scores, m):
    """Rank-``m`` reconstruction ``mean + sum_j scores_j phi_j`` on the full grid."""
    m = _check_m(system, m)
    scores = np.asarray(scores, dtype=float)
    if scores.shape[-1] < m:
        raise InvalidArgumentError(f"need {m} scores, got {scores.shape[-1]}")
    return system.mean + scores[..., :m] @ system.eigenfunctions[:m]


def completion_error(cov_true, phi, mask, grid):
    """Irreducible error of predicting missing-part scores, one value per component.

    ``<phi_M, (C_MM - C_MO C_OO^+ C_OM) phi_M>`` evaluated with a known
    covariance; only meaningful for simulated data.
    """
    cov_true = np.asarray(cov_true, dtype=float)
    phi = np.atleast_2d(phi)
    block = _FragmentBlock(cov_true, phi, mask, grid)
    wm = block.w_miss
    full = np.einsum("jk,kl,jl->j", phi * wm, cov_true, phi * wm)
    pos = block.spectrum > 1e-12 * max(block.spectrum.max(initial=0.0), 1e-300)
    explained = np.sum(block.rotated_b[pos] ** 2 / block.spectrum[pos, None], axis=0)
    return full - explained
