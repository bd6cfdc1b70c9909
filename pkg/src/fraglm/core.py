"""Grids, masked curves and trapezoid quadrature."""

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptySupportError, InvalidArgumentError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def interval_weights(mask, spacing):
    """Trapezoid weights for a boolean mask on a uniform grid.

    Every grid interval whose two end points are both observed contributes
    ``spacing / 2`` to each end point, so each maximal run of true flags is
    integrated on its own and an isolated observed point gets weight 0.
    Works on a single mask (``(p,)``) or a stack of masks (``(n, p)``).
    """
    mask = np.asarray(mask, dtype=bool)
    both = mask[..., 1:] & mask[..., :-1]
    w = np.zeros(mask.shape)
    w[..., 1:] += both
    w[..., :-1] += both
    return w * (0.5 * spacing)


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Equally spaced grid on ``[t_min, t_max]`` with trapezoid weights."""

    t_min: float
    t_max: float
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def spacing(self):
        return (self.t_max - self.t_min) / (self.size - 1)

    @property
    def length(self):
        return self.t_max - self.t_min

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, GridDomain):
            return NotImplemented
        return (
            self.t_min == other.t_min
            and self.t_max == other.t_max
            and self.size == other.size
        )

    def __hash__(self):
        return hash((self.t_min, self.t_max, self.size))


def make_grid(t_min, t_max, n_points):
    """Build a :class:`GridDomain` with ``n_points`` equally spaced points."""
    if int(n_points) != n_points or n_points < 2:
        raise InvalidArgumentError(f"n_points must be an integer >= 2, got {n_points!r}")
    t_min, t_max = float(t_min), float(t_max)
    if not (np.isfinite(t_min) and np.isfinite(t_max)) or t_min >= t_max:
        raise InvalidArgumentError(f"need finite t_min < t_max, got [{t_min}, {t_max}]")
    n_points = int(n_points)
    points = np.linspace(t_min, t_max, n_points)
    weights = interval_weights(np.ones(n_points, dtype=bool), (t_max - t_min) / (n_points - 1))
    return GridDomain(t_min, t_max, _frozen(points), _frozen(weights))


def _check_same_length(grid, *arrays):
    for a in arrays:
        if a.shape[-1] != grid.size:
            raise InvalidArgumentError(
                f"array of length {a.shape[-1]} does not match grid of size {grid.size}"
            )


def inner_product(f, g, grid):
    """Trapezoid approximation of the L2 inner product on the grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same_length(grid, f, g)
    return (f * g) @ grid.weights


def masked_inner_product(f, g, mask, grid):
    """Inner product restricted to the observed part of ``mask``.

    Values of ``f`` and ``g`` under false flags are never read, so they may
    hold NaN.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    _check_same_length(grid, f, g, mask)
    if not mask.any():
        raise EmptySupportError("mask has no observed grid point")
    w = interval_weights(mask, grid.spacing)
    return np.where(mask, f * g, 0.0) @ w


def norm(f, grid):
    return float(np.sqrt(inner_product(f, f, grid)))


@dataclass(frozen=True, eq=False)
class ObservedCurve:
    """One curve sampled on the grid; entries under false mask flags are NaN."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        values = np.asarray(self.values, dtype=float)
        if mask.shape != values.shape or mask.ndim != 1:
            raise InvalidArgumentError("values and mask must be 1-d arrays of equal length")
        if not mask.any():
            raise EmptySupportError("curve has no observed grid point")
        object.__setattr__(self, "mask", _frozen(mask, bool))
        object.__setattr__(self, "values", _frozen(np.where(mask, values, np.nan)))

    @property
    def is_complete(self):
        return bool(self.mask.all())

    def observed(self):
        """Values at observed grid points only."""
        return self.values[self.mask]


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` partially observed curves on a common grid plus scalar responses.

    ``values`` is an ``(n, p)`` array holding NaN at unobserved points and
    ``mask`` the matching boolean observation pattern.
    """

    grid: GridDomain
    values: np.ndarray
    mask: np.ndarray
    responses: np.ndarray
    noisy: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidArgumentError("values must be a 2-d array (curves x grid points)")
        mask = np.asarray(self.mask, dtype=bool) if self.mask is not None else np.isfinite(values)
        responses = np.asarray(self.responses, dtype=float).ravel()
        n, p = values.shape
        if mask.shape != values.shape:
            raise InvalidArgumentError(f"mask shape {mask.shape} != values shape {values.shape}")
        if p != self.grid.size:
            raise InvalidArgumentError(f"curves have {p} points but grid has {self.grid.size}")
        if responses.shape[0] != n:
            raise InvalidArgumentError(f"{n} curves but {responses.shape[0]} responses")
        if n < 2:
            raise InvalidArgumentError("a dataset needs at least 2 curves")
        empty = np.flatnonzero(~mask.any(axis=1))
        if empty.size:
            raise EmptySupportError(f"curves {empty.tolist()} have no observed grid point")
        if not np.all(np.isfinite(values[mask])):
            raise InvalidArgumentError("observed values must be finite")
        if not np.all(np.isfinite(responses)):
            raise InvalidArgumentError("responses must be finite")
        object.__setattr__(self, "mask", _frozen(mask, bool))
        object.__setattr__(self, "values", _frozen(np.where(mask, values, np.nan)))
        object.__setattr__(self, "responses", _frozen(responses))
        object.__setattr__(self, "noisy", bool(self.noisy))

    @classmethod
    def from_curves(cls, grid, curves, responses, noisy=False):
        values = np.vstack([c.values for c in curves])
        mask = np.vstack([c.mask for c in curves])
        return cls(grid, values, mask, responses, noisy)

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def curve(self, i):
        return ObservedCurve(self.values[i], self.mask[i])

    @property
    def curves(self):
        return [self.curve(i) for i in range(self.n)]

    @property
    def complete(self):
        """Boolean vector flagging fully observed curves."""
        return self.mask.all(axis=1)

    def filled(self, fill=0.0):
        """Values with unobserved entries replaced by ``fill``."""
        return np.where(self.mask, self.values, fill)

    def subset(self, index):
        index = np.asarray(index)
        return FunctionalDataset(
            self.grid, self.values[index], self.mask[index], self.responses[index], self.noisy
        )

    def with_responses(self, responses):
        return FunctionalDataset(self.grid, self.values, self.mask, responses, self.noisy)
