"""Reference estimators: complete data (ORI), complete cases only (SUB) and
fragment-integrated scores on smoothed moments (IN)."""

import numpy as np

from .core import interval_weights
from .eigen import complete_scores, eigendecompose, fit_slope, select_m_fve, weighted_scores
from .exceptions import IncompleteDataError, InsufficientDataError, stage
from .nme import FitResult, partial_moments
from .smoothing import Kernel
from .wme import smooth_moments


def fit_ori(dataset, fve_threshold=0.95, n_components=None):
    """Classical FPCA regression on fully observed curves."""
    if not dataset.complete.all():
        bad = np.flatnonzero(~dataset.complete)
        raise IncompleteDataError(
            f"ORI needs fully observed curves; {bad.size} are incomplete (e.g. {bad[:5].tolist()})"
        )
    # with full masks the pairwise moments are the sample mean and covariance
    with stage("partial_moments"):
        moments = partial_moments(dataset)
    with stage("eigendecompose"):
        system = eigendecompose(moments.cov, mean=moments.mean)
    with stage("select_m"):
        m = n_components or select_m_fve(system.eigenvalues, fve_threshold)
    with stage("complete_scores"):
        scores = complete_scores(dataset, system, m)
    with stage("fit_slope"):
        estimate = fit_slope(scores, dataset.responses, system, m)
    return FitResult(estimate, system, scores, dict(moments=moments))


def fit_sub(dataset, fve_threshold=0.95, n_components=None):
    """Drop every incomplete curve, then fit ORI on what is left."""
    keep = np.flatnonzero(dataset.complete)
    need = (n_components or 1) + 1
    if keep.size < max(need, 2):
        raise InsufficientDataError(
            f"only {keep.size} fully observed curves remain (need at least {max(need, 2)})"
        )
    subset = dataset if keep.size == dataset.n else dataset.subset(keep)
    result = fit_ori(subset, fve_threshold, n_components)
    result.diagnostics["n_complete"] = int(keep.size)
    return result


def fragment_scores(dataset, system, m):
    """Scores integrated over each curve's observed fragment only (no rescaling)."""
    centered = np.where(dataset.mask, dataset.values - system.mean, 0.0)
    weights = interval_weights(dataset.mask, dataset.grid.spacing)
    return weighted_scores(centered, weights, system.eigenfunctions[:m])


def fit_in(
    dataset,
    kernel=Kernel.EPANECHNIKOV,
    bandwidths=None,
    fve_threshold=0.95,
    n_components=None,
    smoothed=None,
):
    """Smoothed moments as in WME, but scores by fragment quadrature."""
    if smoothed is None:
        smoothed = smooth_moments(dataset, kernel, bandwidths)
    system = smoothed.system
    with stage("select_m"):
        m = n_components or select_m_fve(system.eigenvalues, fve_threshold)
    scores = fragment_scores(dataset, system, m)
    with stage("fit_slope"):
        estimate = fit_slope(scores, dataset.responses, system, m)
    diagnostics = dict(smoothed=smoothed, noise=smoothed.noise, bandwidths=smoothed.bandwidths)
    return FitResult(estimate, system, scores, diagnostics)
