"""Covariance eigen-analysis and the score regression for the slope function."""

from dataclasses import dataclass

import numpy as np

from .core import GridDomain, _frozen
from .exceptions import (
    DegenerateSpectrumError,
    IncompleteDataError,
    InvalidArgumentError,
    SingularDesignError,
)

#: relative cut-off below which eigenvalues are treated as zero
EIGENVALUE_RTOL = 1e-10
#: largest admissible condition number of the score Gram matrix
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class CovarianceSurface:
    """Covariance function evaluated on the grid x grid lattice (symmetrized)."""

    grid: GridDomain
    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.values, dtype=float)
        p = self.grid.size
        if c.shape != (p, p):
            raise InvalidArgumentError(f"covariance must be {p}x{p}, got {c.shape}")
        object.__setattr__(self, "values", _frozen(0.5 * (c + c.T)))

    def diagonal(self):
        return np.diag(self.values).copy()


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Estimated mean, eigenvalues (descending) and eigenfunctions on the grid.

    ``eigenfunctions`` has one row per component and is orthonormal under the
    grid's trapezoid inner product.
    """

    grid: GridDomain
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "eigenvalues", _frozen(np.ravel(self.eigenvalues)))
        phi = np.asarray(self.eigenfunctions, dtype=float).reshape(-1, self.grid.size)
        object.__setattr__(self, "eigenfunctions", _frozen(phi))
        if self.noise_variance < 0:
            raise InvalidArgumentError("noise_variance must be >= 0")

    @property
    def n_components(self):
        return self.eigenvalues.shape[0]

    def replace(self, **changes):
        fields = dict(
            grid=self.grid,
            mean=self.mean,
            eigenvalues=self.eigenvalues,
            eigenfunctions=self.eigenfunctions,
            noise_variance=self.noise_variance,
        )
        fields.update(changes)
        return EigenSystem(**fields)


@dataclass(frozen=True, eq=False)
class SlopeEstimate:
    """Truncation level, basis coefficients and the slope function on the grid."""

    grid: GridDomain
    m: int
    coefficients: np.ndarray
    gamma: np.ndarray
    intercept: float

    def predict_from_scores(self, scores, y_mean):
        scores = np.asarray(scores, dtype=float)[:, : self.m]
        return y_mean + scores @ self.coefficients


def _normalize_signs(phi, weights):
    integrals = phi @ weights
    for j, integral in enumerate(integrals):
        if abs(integral) >= 1e-10:
            flip = integral < 0
        else:
            nz = np.flatnonzero(np.abs(phi[j]) > 1e-10)
            flip = nz.size > 0 and phi[j, nz[0]] < 0
        if flip:
            phi[j] = -phi[j]
    return phi


def eigendecompose(surface, max_components=None, mean=None, noise_variance=0.0):
    """Solve the discretized eigen-equation of the covariance operator.

    The operator ``f -> int c(., s) f(s) ds`` is discretized with the trapezoid
    weights ``W`` and symmetrized as ``W^1/2 C W^1/2``; its eigenvectors ``v``
    map back to eigenfunctions ``W^-1/2 v`` with unit quadrature norm.
    Eigenpairs with ``lambda <= max(0, 1e-10 * lambda_1)`` are discarded.
    """
    grid = surface.grid
    c = surface.values
    if not np.all(np.isfinite(c)):
        raise InvalidArgumentError("covariance surface has non-finite entries")
    p = grid.size
    if max_components is None:
        max_components = p
    if not 1 <= max_components <= p:
        raise InvalidArgumentError(f"max_components must lie in [1, {p}], got {max_components}")

    sw = np.sqrt(grid.weights)
    vals, vecs = np.linalg.eigh(sw[:, None] * c * sw[None, :])
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    cutoff = max(0.0, EIGENVALUE_RTOL * vals[0])
    keep = np.flatnonzero(vals > cutoff)[:max_components]
    phi = (vecs[:, keep] / sw[:, None]).T
    phi = _normalize_signs(phi, grid.weights)
    if mean is None:
        mean = np.zeros(p)
    return EigenSystem(grid, mean, vals[keep], phi, noise_variance)


def select_m_fve(eigenvalues, threshold=0.95):
    """Smallest ``k`` whose leading eigenvalues explain a ``threshold`` share."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < threshold < 1:
        raise InvalidArgumentError(f"FVE threshold must lie in (0, 1), got {threshold}")
    if lam.size == 0 or not np.any(lam > 0):
        raise DegenerateSpectrumError("no positive eigenvalue to select from")
    if np.any(lam < 0):
        raise InvalidArgumentError("eigenvalues must be nonnegative")
    fve = np.cumsum(lam) / lam.sum()
    return int(np.argmax(fve >= threshold)) + 1


def _check_m(system, m):
    if int(m) != m or m < 1:
        raise InvalidArgumentError(f"m must be a positive integer, got {m!r}")
    if m > system.n_components:
        raise InvalidArgumentError(
            f"m={m} exceeds the {system.n_components} available components"
        )
    return int(m)


def weighted_scores(centered, weights, phi):
    """Quadrature scores ``sum_k weights[i, k] centered[i, k] phi[j, k]``.

    ``centered`` must already be zero (not NaN) at unobserved points.
    """
    return (centered * weights) @ phi.T


def complete_scores(dataset, system, m):
    """FPC scores of fully observed curves by trapezoid quadrature."""
    m = _check_m(system, m)
    if not dataset.complete.all():
        bad = np.flatnonzero(~dataset.complete)
        raise IncompleteDataError(
            f"curves {bad[:10].tolist()} are only partially observed; use the NME/WME estimators"
        )
    centered = dataset.values - system.mean
    return weighted_scores(centered, dataset.grid.weights, system.eigenfunctions[:m])


def fit_slope(scores, responses, system, m):
    """Least squares of centered responses on the first ``m`` score columns."""
    m = _check_m(system, m)
    u = np.asarray(scores, dtype=float)[:, :m]
    y = np.asarray(responses, dtype=float)
    n = y.shape[0]
    if u.shape[0] != n:
        raise InvalidArgumentError(f"{u.shape[0]} score rows but {n} responses")
    if u.shape[1] < m:
        raise InvalidArgumentError(f"score matrix has {u.shape[1]} columns, need {m}")
    if n <= m:
        raise SingularDesignError(f"need more curves than components (n={n}, m={m})")
    y_mean = y.mean()
    gram = u.T @ u
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularDesignError(
            f"score Gram matrix is singular (condition number {cond:.3g})", condition_number=cond
        )
    coef = np.linalg.solve(gram, u.T @ (y - y_mean))
    phi = system.eigenfunctions[:m]
    gamma = coef @ phi
    intercept = y_mean - gamma @ (system.mean * system.grid.weights)
    return SlopeEstimate(system.grid, m, _frozen(coef), _frozen(gamma), float(intercept))
