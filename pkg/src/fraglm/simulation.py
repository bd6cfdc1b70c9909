"""Simulation designs, missing-interval generator, MISE and the Monte Carlo driver."""

import enum
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import fit_in, fit_ori, fit_sub
from .core import FunctionalDataset, _frozen, make_grid
from .exceptions import FragLMError, InvalidArgumentError
from .nme import RidgeCompletionConfig, fit_nme
from .wme import Bandwidths, fit_wme, smooth_moments

METHODS = ("ori", "nme", "sub", "wme", "in")


class Scenario(enum.IntEnum):
    NOISELESS_RANK2 = 1
    NOISY_50TERM = 2


class Stream(enum.IntEnum):
    """Purpose tags used to split the random stream of one replication."""

    CURVES = 0
    MASKS = 1
    OBS_NOISE = 2
    MODEL_NOISE = 3


def make_rng(seed, replication=0, purpose=Stream.CURVES):
    """Counter-based Philox generator for one (replication, purpose) pair.

    Streams are keyed by ``SeedSequence(seed, spawn_key=(replication,
    purpose))``, so a replication's data do not depend on how replications are
    scheduled across workers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = Scenario.NOISELESS_RANK2
    n: int = 100
    grid_points: int = 30
    a1: float = 1.5
    a2: float = 0.2
    noise_sd_obs: float = None
    noise_sd_model: float = None
    seed: int = 0
    replications: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(int(self.scenario)))
        noisy = self.scenario is Scenario.NOISY_50TERM
        if self.noise_sd_obs is None:
            object.__setattr__(self, "noise_sd_obs", 0.5 if noisy else 0.0)
        if self.noise_sd_model is None:
            object.__setattr__(self, "noise_sd_model", 0.5 if noisy else 1.0)
        if self.n < 2:
            raise InvalidArgumentError(f"n must be >= 2, got {self.n}")
        if self.a2 < 0:
            raise InvalidArgumentError(f"a2 must be >= 0, got {self.a2}")
        if self.replications < 1:
            raise InvalidArgumentError("replications must be >= 1")
        if self.grid_points < 2:
            raise InvalidArgumentError("grid_points must be >= 2")
        if self.noise_sd_obs < 0 or self.noise_sd_model < 0:
            raise InvalidArgumentError("noise standard deviations must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return ScenarioConfig(**d)


@dataclass(frozen=True, eq=False)
class TruthBundle:
    gamma_true: np.ndarray
    eigenfunctions_true: np.ndarray
    eigenvalues_true: np.ndarray
    scores_true: np.ndarray
    gamma_coefficients: np.ndarray
    complete: FunctionalDataset

    def covariance(self):
        phi = self.eigenfunctions_true
        return (phi.T * self.eigenvalues_true) @ phi


def missing_interval(a1, a2, t1, t2):
    """End points of ``[R - E, R + E]`` with ``R = a1 sqrt(T1)``, ``E = a2 T2``."""
    r = a1 * np.sqrt(t1)
    e = a2 * t2
    return r - e, r + e


def mask_outside(lo, hi, grid):
    """Observation mask that is false exactly on the grid points inside ``[lo, hi]``."""
    t = grid.points
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    return ~((t >= lo) & (t <= hi))


def gen_missing_mask(a1, a2, grid, rng, n=None):
    """Draw observation masks; ``n=None`` gives one ``(p,)`` mask, else ``(n, p)``."""
    size = () if n is None else (int(n),)
    t1 = rng.uniform(size=size)
    t2 = rng.uniform(size=size)
    mask = mask_outside(*missing_interval(a1, a2, t1, t2), grid)
    if mask.ndim == 2:
        mask = mask.reshape(size + (grid.size,))
    else:
        mask = mask.reshape(grid.size)
    assert mask.any(axis=-1).all(), "missing interval swallowed the whole grid"
    return mask


def scenario1_basis(grid):
    t = grid.points
    phi = np.sqrt(2.0) * np.vstack([np.sin(np.pi * t / 2), np.sin(3 * np.pi * t / 2)])
    lam = np.array([(np.pi / 2) ** -2, (3 * np.pi / 2) ** -2])
    return lam, phi


def scenario2_basis(grid, n_terms=50):
    t = grid.points
    j = np.arange(1, n_terms + 1)
    phi = np.sqrt(2.0) * np.cos(np.pi * j[:, None] * t[None, :])
    phi[0] = 1.0
    lam = j ** -1.1
    gamma = 4.0 * (-1.0) ** (j + 1) * j**-2.0
    gamma[0] = 0.3
    return lam, phi, gamma


def _assemble(config, grid, x, z, scores, lam, phi, coef, replication):
    gamma = coef @ phi
    eps = make_rng(config.seed, replication, Stream.MODEL_NOISE).normal(
        0.0, config.noise_sd_model, config.n
    )
    y = x @ (gamma * grid.weights) + eps
    mask = gen_missing_mask(
        config.a1, config.a2, grid, make_rng(config.seed, replication, Stream.MASKS), config.n
    )
    noisy = config.noise_sd_obs > 0
    data = FunctionalDataset(grid, z, mask, y, noisy)
    complete = FunctionalDataset(grid, z, np.ones_like(mask), y, noisy)
    truth = TruthBundle(_frozen(gamma), _frozen(phi), _frozen(lam), _frozen(scores), _frozen(coef), complete)
    return data, truth


def gen_scenario1(config, replication=0):
    """Rank-two Gaussian process without measurement error."""
    if config.scenario is not Scenario.NOISELESS_RANK2:
        raise InvalidArgumentError("gen_scenario1 needs a NOISELESS_RANK2 config")
    grid = make_grid(0.0, 1.0, config.grid_points)
    lam, phi = scenario1_basis(grid)
    rng = make_rng(config.seed, replication, Stream.CURVES)
    scores = rng.normal(size=(config.n, 2)) * np.sqrt(lam)
    x = scores @ phi
    z = x
    if config.noise_sd_obs > 0:
        z = x + make_rng(config.seed, replication, Stream.OBS_NOISE).normal(
            0.0, config.noise_sd_obs, x.shape
        )
    return _assemble(config, grid, x, z, scores, lam, phi, np.array([1.0, 3.0]), replication)


def gen_scenario2(config, replication=0):
    """Fifty-term process with uniform scores, observed with Gaussian noise."""
    if config.scenario is not Scenario.NOISY_50TERM:
        raise InvalidArgumentError("gen_scenario2 needs a NOISY_50TERM config")
    grid = make_grid(0.0, 1.0, config.grid_points)
    lam, phi, coef = scenario2_basis(grid)
    j = np.arange(1, lam.size + 1)
    rng = make_rng(config.seed, replication, Stream.CURVES)
    w = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(config.n, lam.size))
    scores = (-1.0) ** (j + 1) * j ** (-1.1 / 2) * w
    x = scores @ phi
    z = x
    if config.noise_sd_obs > 0:
        z = x + make_rng(config.seed, replication, Stream.OBS_NOISE).normal(
            0.0, config.noise_sd_obs, x.shape
        )
    return _assemble(config, grid, x, z, scores, lam, phi, coef, replication)


def generate(config, replication=0):
    if config.scenario is Scenario.NOISELESS_RANK2:
        return gen_scenario1(config, replication)
    return gen_scenario2(config, replication)


def integrated_squared_error(gamma_hat, gamma_true, grid):
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if gamma_hat.ndim == 0 or gamma_hat.shape[-1] != grid.size:
        raise InvalidArgumentError("estimate does not live on the evaluation grid")
    return ((gamma_hat - gamma_true) ** 2) @ grid.weights


def mise(estimates, gamma_true, grid):
    """Mean integrated squared error and the per-replication ISE values."""
    if len(estimates) == 0:
        raise InvalidArgumentError("no estimates to average")
    ise = []
    for est in estimates:
        if est.grid != grid:
            raise InvalidArgumentError("estimate grid does not match the reference grid")
        ise.append(float(integrated_squared_error(est.gamma, gamma_true, grid)))
    return float(np.mean(ise)), ise


@dataclass(frozen=True)
class FitOptions:
    """Tuning shared by every method in a run (CLI config keys use these names)."""

    fve_threshold: float = 0.95
    rho: object = "auto"
    rho_grid: tuple = None
    min_complete_for_gcv: int = 5
    kernel: str = "epanechnikov"
    h_mu: float = None
    h_c: float = None
    n_components: int = None

    def ridge(self):
        return RidgeCompletionConfig(self.rho, self.rho_grid, self.min_complete_for_gcv)

    def bandwidths(self, dataset):
        return Bandwidths.resolve(dataset, self.h_mu, self.h_c)


def fit_method(method, dataset, options=FitOptions(), complete=None, smoothed=None):
    """Dispatch one named method. ``complete`` is the unmasked data used by ORI."""
    method = method.lower()
    o = options
    if method == "ori":
        return fit_ori(dataset if complete is None else complete, o.fve_threshold, o.n_components)
    if method == "sub":
        return fit_sub(dataset, o.fve_threshold, o.n_components)
    if method == "nme":
        return fit_nme(dataset, o.fve_threshold, o.ridge(), o.n_components)
    if method in ("wme", "in"):
        if smoothed is None:
            smoothed = smooth_moments(dataset, o.kernel, o.bandwidths(dataset))
        fit = fit_wme if method == "wme" else fit_in
        return fit(dataset, fve_threshold=o.fve_threshold, n_components=o.n_components, smoothed=smoothed)
    raise InvalidArgumentError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


@dataclass(frozen=True)
class MCResult:
    method: str
    scenario: ScenarioConfig
    mise: float
    per_rep_ise: tuple
    excluded: int = 0
    warnings: tuple = ()
    wall_time: float = field(default=0.0, compare=False)


def _replication(config, methods, options, rep):
    data, truth = generate(config, rep)
    out = {}
    smoothed = None
    for method in methods:
        start = time.perf_counter()
        try:
            if method in ("wme", "in") and smoothed is None:
                smoothed = smooth_moments(data, options.kernel, options.bandwidths(data))
            fit = fit_method(method, data, options, complete=truth.complete, smoothed=smoothed)
            ise = float(integrated_squared_error(fit.estimate.gamma, truth.gamma_true, data.grid))
            out[method] = (ise, None, time.perf_counter() - start)
        except FragLMError as err:
            out[method] = (None, f"rep {rep}: {type(err).__name__}: {err}", time.perf_counter() - start)
    return out


def _chunk(args):
    config, methods, options, reps = args
    return [_replication(config, methods, options, r) for r in reps]


def worker_count():
    env = os.environ.get("FRAGLM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidArgumentError(f"FRAGLM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_monte_carlo(config, methods, options=FitOptions(), workers=None):
    """Fit every method on the same simulated datasets, one per replication.

    Replication ``r`` draws from its own random streams, so results do not
    depend on ``workers``. Failed fits are excluded from the MISE and
    reported in ``warnings``.
    """
    methods = [m.lower() for m in methods]
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    workers = worker_count() if workers is None else max(1, int(workers))
    reps = list(range(config.replications))
    if workers == 1 or len(reps) == 1:
        per_rep = _chunk((config, methods, options, reps))
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, [(config, methods, options, c) for c in chunks]))
        per_rep = [None] * len(reps)
        for c, part in zip(chunks, parts):
            for r, res in zip(c, part):
                per_rep[r] = res

    results = []
    for m in methods:
        ise = tuple(res[m][0] for res in per_rep if res[m][0] is not None)
        warns = tuple(res[m][1] for res in per_rep if res[m][1] is not None)
        elapsed = float(sum(res[m][2] for res in per_rep))
        value = float(np.mean(ise)) if ise else float("nan")
        results.append(MCResult(m, config, value, ise, len(warns), warns, elapsed))
    return results


def expected_missing_length(a1, a2, draws=100_000, seed=0):
    """Monte Carlo mean of ``|M cap [0, 1]|`` for the missing-interval design."""
    rng = make_rng(seed, 0, Stream.MASKS)
    lo, hi = missing_interval(a1, a2, rng.uniform(size=draws), rng.uniform(size=draws))
    return float(np.mean(np.clip(np.minimum(hi, 1.0) - np.maximum(lo, 0.0), 0.0, None)))
