"""Kernels and local linear smoothers for scattered (or binned) data."""

import enum

import numpy as np

from .exceptions import InsufficientDataError, InvalidArgumentError


class Kernel(enum.Enum):
    EPANECHNIKOV = "epanechnikov"
    QUARTIC = "quartic"
    TRIANGULAR = "triangular"
    UNIFORM = "uniform"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        if self is Kernel.EPANECHNIKOV:
            k = 0.75 * (1.0 - u**2)
        elif self is Kernel.QUARTIC:
            k = 15.0 / 16.0 * (1.0 - u**2) ** 2
        elif self is Kernel.TRIANGULAR:
            k = 1.0 - np.abs(u)
        else:
            k = np.full_like(u, 0.5)
        return np.where(inside, k, 0.0)

    @classmethod
    def from_name(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise InvalidArgumentError(f"unknown kernel {name!r}; choose from {options}") from None


def rule_of_thumb_bandwidth(domain_length, n_obs, constant):
    """``constant * |T| * n_obs ** (-1/5)``."""
    if n_obs < 1:
        raise InvalidArgumentError("need at least one observation for a bandwidth")
    return constant * domain_length * n_obs ** (-0.2)


# Below this relative determinant a local design is treated as degenerate.
_DET_RTOL = 1e-10
_MAX_WIDENINGS = 2


def _bin(locations, values, weights):
    """Collapse repeated locations to (location, weight sum, weighted value sum)."""
    uniq, inverse = np.unique(locations, return_inverse=True)
    wsum = np.bincount(inverse, weights=weights, minlength=uniq.size)
    ysum = np.bincount(inverse, weights=weights * values, minlength=uniq.size)
    return uniq, wsum, ysum


def local_linear_1d(x, y, eval_points, bandwidth, kernel=Kernel.EPANECHNIKOV, weights=None):
    """Local linear estimate of ``E[y | x]`` at each evaluation point.

    Minimizes ``sum K((x_i - t)/h) w_i (y_i - b0 - b1 (t - x_i))^2`` and returns
    ``b0``. Where fewer than two distinct locations carry weight, the
    bandwidth is doubled locally (at most twice) before giving up.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    if not (x.shape == y.shape == w.shape):
        raise InvalidArgumentError("x, y and weights must have the same length")
    loc, wsum, ysum = _bin(x, y, w)
    return binned_local_linear_1d(loc, wsum, ysum, eval_points, bandwidth, kernel)


def binned_local_linear_1d(loc, wsum, ysum, eval_points, bandwidth, kernel=Kernel.EPANECHNIKOV):
    """:func:`local_linear_1d` on pre-binned data.

    ``wsum[u]`` is the total weight at location ``loc[u]`` and ``ysum[u]`` the
    weighted sum of responses there.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    loc = np.asarray(loc, dtype=float)
    t = np.asarray(eval_points, dtype=float).ravel()
    out = np.full(t.shape, np.nan)
    todo = np.arange(t.size)
    h = float(bandwidth)
    for _ in range(_MAX_WIDENINGS + 1):
        d = loc[None, :] - t[todo, None]
        kd = kernel(d / h)
        k = kd * wsum[None, :]
        ky = kd * ysum[None, :]
        s0, s1, s2 = k.sum(1), (k * d).sum(1), (k * d * d).sum(1)
        t0, t1 = ky.sum(1), (ky * d).sum(1)
        det = s0 * s2 - s1 * s1
        n_support = (k > 0).sum(1)
        ok = (n_support >= 2) & (det > _DET_RTOL * np.maximum(s0 * s2, 1e-300))
        out[todo[ok]] = (s2[ok] * t0[ok] - s1[ok] * t1[ok]) / det[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
        h *= 2.0
    raise InsufficientDataError(
        f"local window degenerate at {t[todo][:5].tolist()} even with bandwidth {h / 2:.4g}"
    )


def _solve_first(m, rhs):
    """Batched solve of small symmetric systems; returns the first coefficient."""
    return np.linalg.solve(m, rhs[..., None])[..., 0, 0]


def local_linear_2d(
    x1, x2, y, eval_points, bandwidth, kernel=Kernel.EPANECHNIKOV, weights=None, cross_term=True
):
    """Local linear surface estimate on the lattice ``eval_points x eval_points``.

    Fits ``y ~ b0 + b1 (x1 - s) + b2 (x2 - t) [+ b3 (x1 - s)(x2 - t)]`` with
    product-kernel weights ``K((x1 - s)/h) K((x2 - t)/h)`` and returns ``b0``
    as a square array indexed ``[s, t]``. The cross term makes the fit exact
    for surfaces ``a + b s + c t + d s t``; without it only planes are
    reproduced exactly away from symmetric windows. Data are binned on their
    distinct coordinates so the weighted sums reduce to small matrix products.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(eval_points, dtype=float).ravel()
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).ravel()
    if not (x1.shape == x2.shape == y.shape == w.shape):
        raise InvalidArgumentError("x1, x2, y and weights must have the same length")
    loc, inverse = np.unique(np.concatenate([x1, x2]), return_inverse=True)
    i1, i2 = inverse[: x1.size], inverse[x1.size :]
    count = np.zeros((loc.size, loc.size))
    total = np.zeros((loc.size, loc.size))
    np.add.at(count, (i1, i2), w)
    np.add.at(total, (i1, i2), w * y)
    return binned_local_linear_2d(loc, count, total, t, bandwidth, kernel, cross_term)


def binned_local_linear_2d(
    loc, count, total, eval_points, bandwidth, kernel=Kernel.EPANECHNIKOV, cross_term=True
):
    """:func:`local_linear_2d` on data binned on the lattice ``loc x loc``.

    ``count[u, v]`` is the total weight of points at ``(loc[u], loc[v])`` and
    ``total[u, v]`` their weighted response sum.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    loc = np.asarray(loc, dtype=float)
    t = np.asarray(eval_points, dtype=float).ravel()
    out = np.full((t.size, t.size), np.nan)
    todo = np.ones_like(out, dtype=bool)
    h = float(bandwidth)
    d = loc[None, :] - t[:, None]
    # design terms (power of d_s, power of d_t)
    terms = [(0, 0), (1, 0), (0, 1)] + ([(1, 1)] if cross_term else [])
    for _ in range(_MAX_WIDENINGS + 1):
        k = [kernel(d / h)]
        k += [k[0] * d, k[0] * d * d]
        # S[(a, b)][s, t] = sum_uv K_s(u) d_su^a N[u, v] K_t(v) d_tv^b
        sums = {}

        def s_ab(a, b, mat=count):
            key = (a, b, mat is count)
            if key not in sums:
                sums[key] = k[a] @ mat @ k[b].T
            return sums[key]

        m = np.stack(
            [np.stack([s_ab(a1 + a2, b1 + b2) for a2, b2 in terms], -1) for a1, b1 in terms],
            -2,
        )
        rhs = np.stack([s_ab(a, b, total) for a, b in terms], -1)
        det = np.linalg.det(m)
        scale = np.prod(np.diagonal(m, axis1=-2, axis2=-1), axis=-1)
        ok = todo & (det > _DET_RTOL * np.maximum(scale, 1e-300)) & (m[..., 0, 0] > 0)
        if ok.any():
            out[ok] = _solve_first(m[ok], rhs[ok])
        todo &= ~ok
        if not todo.any():
            return out
        h *= 2.0
    bad = np.argwhere(todo)[:5]
    raise InsufficientDataError(
        f"local surface window degenerate at {[(t[a], t[b]) for a, b in bad]} "
        f"even with bandwidth {h / 2:.4g}"
    )
