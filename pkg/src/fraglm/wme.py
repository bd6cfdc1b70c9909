"""Slope estimation from noisy curve fragments.

Mean and covariance come from local linear smoothers pooled over all curves.
The measurement-error variance is read off the gap between the raw diagonal
and the smoothed surface. Scores are conditional expectations given each
curve's noisy observations (PACE).
"""

import enum
from dataclasses import dataclass

import numpy as np

from .core import _frozen
from .eigen import CovarianceSurface, eigendecompose, fit_slope, select_m_fve, _check_m
from .exceptions import ConfigurationError, InvalidArgumentError, NumericError, stage
from .nme import FitResult
from .smoothing import (
    Kernel,
    binned_local_linear_1d,
    binned_local_linear_2d,
    rule_of_thumb_bandwidth,
)

MU_CONSTANT = 1.0
COV_CONSTANT = 1.5
_SINGULAR_COND = 1e14


class BandwidthMode(enum.Enum):
    FIXED = "fixed"
    RULE_OF_THUMB = "rule_of_thumb"


@dataclass(frozen=True)
class Bandwidths:
    h_mu: float
    h_c: float
    mode: BandwidthMode = BandwidthMode.FIXED

    def __post_init__(self):
        if not (self.h_mu > 0 and self.h_c > 0):
            raise InvalidArgumentError(f"bandwidths must be positive, got {self.h_mu}, {self.h_c}")

    @classmethod
    def rule_of_thumb(cls, dataset):
        n_obs = int(dataset.mask.sum())
        length = dataset.grid.length
        return cls(
            rule_of_thumb_bandwidth(length, n_obs, MU_CONSTANT),
            rule_of_thumb_bandwidth(length, n_obs, COV_CONSTANT),
            BandwidthMode.RULE_OF_THUMB,
        )

    @classmethod
    def resolve(cls, dataset, h_mu=None, h_c=None):
        """Rule-of-thumb values for whichever bandwidth is not given."""
        auto = cls.rule_of_thumb(dataset)
        if h_mu is None and h_c is None:
            return auto
        return cls(
            auto.h_mu if h_mu is None else float(h_mu),
            auto.h_c if h_c is None else float(h_c),
            BandwidthMode.FIXED,
        )


@dataclass(frozen=True, eq=False)
class NoiseModel:
    sigma2: float
    diag_estimate: np.ndarray
    offdiag_diagonal: np.ndarray
    interval: tuple = (np.nan, np.nan)
    raw_sigma2: float = 0.0


@dataclass(frozen=True, eq=False)
class SmoothedMoments:
    """Everything upstream of the score step, shared by the WME and IN fits."""

    mean: np.ndarray
    cov: CovarianceSurface
    diag_estimate: np.ndarray
    system: object
    noise: NoiseModel
    kernel: Kernel
    bandwidths: Bandwidths


def local_linear_mean(dataset, kernel=Kernel.EPANECHNIKOV, h_mu=None):
    """Local linear mean pooled over every observed point, on the grid."""
    kernel = Kernel.from_name(kernel)
    if h_mu is None:
        h_mu = Bandwidths.rule_of_thumb(dataset).h_mu
    counts = dataset.mask.sum(axis=0).astype(float)
    sums = dataset.filled(0.0).sum(axis=0)
    keep = counts > 0
    t = dataset.grid.points
    return binned_local_linear_1d(t[keep], counts[keep], sums[keep], t, h_mu, kernel)


def local_linear_cov(dataset, mean, kernel=Kernel.EPANECHNIKOV, h_c=None, cross_term=True):
    """Smoothed covariance surface and the smoothed raw diagonal ``V_X``.

    Products of a curve's value with itself (the diagonal raw covariances)
    are left out of the surface fit, because they carry the noise variance.
    They are smoothed separately into ``V_X``. ``cross_term=False`` gives the
    plain three-parameter local plane.
    """
    kernel = Kernel.from_name(kernel)
    if h_c is None:
        h_c = Bandwidths.rule_of_thumb(dataset).h_c
    grid = dataset.grid
    obs = dataset.mask.astype(float)
    resid = np.where(dataset.mask, dataset.values - np.asarray(mean), 0.0)
    count = obs.T @ obs
    total = resid.T @ resid
    diag_count = np.diag(count).copy()
    diag_total = np.diag(total).copy()
    # each curve has at most one observation per grid point, so the (u, u)
    # bins hold exactly the l == k products
    np.fill_diagonal(count, 0.0)
    np.fill_diagonal(total, 0.0)
    surface = binned_local_linear_2d(grid.points, count, total, grid.points, h_c, kernel, cross_term)
    keep = diag_count > 0
    v_x = binned_local_linear_1d(
        grid.points[keep], diag_count[keep], diag_total[keep], grid.points, h_c, kernel
    )
    return CovarianceSurface(grid, surface), v_x


def _observed_range(dataset):
    first = dataset.mask.argmax(axis=1)
    last = dataset.grid.size - 1 - dataset.mask[:, ::-1].argmax(axis=1)
    t = dataset.grid.points
    return t[first].min(), t[last].max()


def _integrate_linear(points, values, a, b):
    """Integral over [a, b] of the piecewise-linear interpolant of ``values``."""
    inner = (points > a) & (points < b)
    x = np.concatenate([[a], points[inner], [b]])
    y = np.interp(x, points, values)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def estimate_sigma2(v_x, surface, dataset):
    """Measurement-error variance from the central part of the domain.

    ``2 / |T| * int_T1 (V_X(t) - c(t, t)) dt`` with ``T1`` the observed range
    trimmed by ``|T| / 4`` on each side, clipped at 0.
    """
    grid = dataset.grid
    lo, hi = _observed_range(dataset)
    a, b = lo + grid.length / 4, hi - grid.length / 4
    if not a < b:
        raise ConfigurationError(
            f"central interval [{a:.4g}, {b:.4g}] for the noise variance is empty; "
            "the observed range is too short for a |T|/4 trim"
        )
    g_diag = surface.diagonal()
    v_x = np.asarray(v_x, dtype=float)
    raw = 2.0 * _integrate_linear(grid.points, v_x - g_diag, a, b) / grid.length
    return NoiseModel(max(0.0, raw), _frozen(v_x), _frozen(g_diag), (a, b), raw)


def smooth_moments(dataset, kernel=Kernel.EPANECHNIKOV, bandwidths=None):
    """Smoothed mean, covariance, eigensystem and noise variance."""
    kernel = Kernel.from_name(kernel)
    if bandwidths is None:
        bandwidths = Bandwidths.rule_of_thumb(dataset)
    with stage("local_linear_mean"):
        mean = local_linear_mean(dataset, kernel, bandwidths.h_mu)
    with stage("local_linear_cov"):
        surface, v_x = local_linear_cov(dataset, mean, kernel, bandwidths.h_c)
    with stage("estimate_sigma2"):
        noise = estimate_sigma2(v_x, surface, dataset)
    with stage("eigendecompose"):
        system = eigendecompose(surface, mean=mean, noise_variance=noise.sigma2)
    return SmoothedMoments(_frozen(mean), surface, _frozen(v_x), system, noise, kernel, bandwidths)


def pace_scores(dataset, system, m, cov=None):
    """Conditional-expectation scores ``lambda_j phi_j' Sigma_i^-1 (Z_i - mu_i)``.

    ``Sigma_i`` is the covariance at curve ``i``'s observed points plus the
    noise variance on the diagonal. ``cov`` defaults to the covariance rebuilt
    from the eigensystem. If ``Sigma_i`` is numerically singular (noise
    variance at or near zero), a ridge of ``1e-10 * trace`` is added.
    """
    m = _check_m(system, m)
    lam = system.eigenvalues[:m]
    phi = system.eigenfunctions[:m]
    if cov is None:
        full = system.eigenfunctions
        cov = (full.T * system.eigenvalues) @ full
    cov = np.asarray(cov, dtype=float)
    sigma2 = float(system.noise_variance)
    scores = np.zeros((dataset.n, m))
    resid_all = np.where(dataset.mask, dataset.values - system.mean, 0.0)
    for i in range(dataset.n):
        idx = np.flatnonzero(dataset.mask[i])
        sig = cov[np.ix_(idx, idx)] + sigma2 * np.eye(idx.size)
        if np.linalg.cond(sig) > _SINGULAR_COND:
            # noise variance at or near zero on a low-rank surface
            sig = sig + 1e-10 * np.trace(sig) * np.eye(idx.size)
        if not np.linalg.cond(sig) <= _SINGULAR_COND:
            raise NumericError(f"conditional covariance of curve {i} is singular")
        coef = np.linalg.solve(sig, resid_all[i, idx])
        scores[i] = lam * (phi[:, idx] @ coef)
    return scores


def fit_wme(
    dataset,
    kernel=Kernel.EPANECHNIKOV,
    bandwidths=None,
    fve_threshold=0.95,
    n_components=None,
    smoothed=None,
):
    """Fit the slope function from noisy fragments.

    Pass ``smoothed`` (from :func:`smooth_moments`) to reuse upstream
    estimates across several fits of the same data.
    """
    if smoothed is None:
        smoothed = smooth_moments(dataset, kernel, bandwidths)
    system = smoothed.system
    with stage("select_m"):
        m = n_components or select_m_fve(system.eigenvalues, fve_threshold)
    with stage("pace_scores"):
        scores = pace_scores(dataset, system, m, cov=smoothed.cov.values)
    with stage("fit_slope"):
        estimate = fit_slope(scores, dataset.responses, system, m)
    diagnostics = dict(smoothed=smoothed, noise=smoothed.noise, bandwidths=smoothed.bandwidths)
    return FitResult(estimate, system, scores, diagnostics)
