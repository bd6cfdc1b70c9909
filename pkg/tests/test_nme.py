import warnings

import numpy as np
import pytest

from fraglm.baselines import fit_ori
from fraglm.core import FunctionalDataset, make_grid
from fraglm.eigen import CovarianceSurface, EigenSystem, complete_scores, eigendecompose
from fraglm.exceptions import CoverageError, InvalidArgumentError
from fraglm.nme import (
    PartialMoments,
    RidgeCompletionConfig,
    complete_missing_scores,
    completion_error,
    fit_nme,
    partial_mean,
    partial_moments,
    reconstruct_curve,
    ridge_function,
    select_rho_gcv,
)
from fraglm.simulation import ScenarioConfig, gen_scenario1, mask_outside, scenario1_basis


def scenario1(n=100, a2=0.2, seed=0, grid_points=30, rep=0, **kw):
    cfg = ScenarioConfig(n=n, a2=a2, seed=seed, grid_points=grid_points, replications=rep + 1, **kw)
    return gen_scenario1(cfg, rep)


def true_moments(grid):
    lam, phi = scenario1_basis(grid)
    p = grid.size
    cov = CovarianceSurface(grid, (phi.T * lam) @ phi)
    moments = PartialMoments(np.zeros(p), cov, np.ones(p, int), np.ones((p, p), int))
    return moments, EigenSystem(grid, np.zeros(p), lam, phi)


def test_full_masks_give_sample_moments():
    data, _ = scenario1(n=40, a2=0.0)
    pm = partial_moments(data)
    x = data.values
    np.testing.assert_allclose(pm.mean, x.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(pm.cov.values, np.cov(x.T, bias=True), atol=1e-12)
    assert np.all(pm.pairwise_counts == 40)


def test_two_half_curves():
    g = make_grid(0, 1, 11)
    x1, x2 = np.sin(g.points), np.cos(g.points)
    mask = np.vstack([g.points <= 0.5, g.points >= 0.5])
    d = FunctionalDataset(g, np.vstack([x1, x2]), mask, [0, 1])
    mean, counts = partial_mean(d)
    lo, hi = g.points < 0.5, g.points > 0.5
    np.testing.assert_array_equal(mean[lo], x1[lo])
    np.testing.assert_array_equal(mean[hi], x2[hi])
    assert mean[5] == pytest.approx((x1[5] + x2[5]) / 2)
    # no grid pair is jointly observed twice, so the covariance is undefined
    with pytest.raises(CoverageError):
        partial_moments(d)


def test_uncovered_point_reports_indices():
    g = make_grid(0, 1, 5)
    mask = np.array([[1, 1, 0, 1, 1], [1, 1, 0, 1, 1]], bool)
    d = FunctionalDataset(g, np.ones((2, 5)), mask, [0, 1])
    with pytest.raises(CoverageError) as err:
        partial_moments(d)
    assert err.value.indices == [2]


def _sup_errors(reps=100, seed=11):
    g = make_grid(0, 1, 30)
    lam, phi = scenario1_basis(g)
    truth = (phi.T * lam) @ phi
    errs = np.zeros((reps, 2))
    for rep in range(reps):
        for k, n in enumerate((100, 400)):
            data, _ = scenario1(n=n, seed=seed, rep=rep)
            errs[rep, k] = np.abs(partial_moments(data).cov.values - truth).max()
    return errs


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="sampling law of the sup error: the n=400 error beats n=100 in about 90% "
    "of reps here and 76% for plain complete-data sample covariances",
)
def test_covariance_consistency():
    errs = _sup_errors()
    assert np.sum(errs[:, 1] < errs[:, 0]) >= 95


@pytest.mark.slow
def test_covariance_error_rate():
    # root-n rate: quadrupling n should roughly halve the sup error
    errs = _sup_errors()
    ratio = errs[:, 1].mean() / errs[:, 0].mean()
    assert 0.35 < ratio < 0.65


def test_full_mask_completion_equals_complete_scores():
    data, _ = scenario1(n=30, a2=0.0)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    for rho in (0.0, 1e-3, 10.0):
        cs = complete_missing_scores(data, pm, sys, 2, RidgeCompletionConfig(rho))
        np.testing.assert_array_equal(cs.total, complete_scores(data, sys, 2))
        np.testing.assert_array_equal(cs.missing_part, 0.0)


def test_huge_ridge_kills_missing_part():
    data, _ = scenario1(n=100, a2=0.4, seed=3)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    rho = 1e6 * sys.eigenvalues[0]
    cs = complete_missing_scores(data, pm, sys, 2, RidgeCompletionConfig(rho))
    assert np.linalg.norm(cs.missing_part) <= 1e-4 * np.linalg.norm(cs.observed_part)


def test_decomposition_is_exact():
    data, _ = scenario1(n=80, a2=0.4, seed=5)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    cs = complete_missing_scores(data, pm, sys, 2, RidgeCompletionConfig(1e-3))
    np.testing.assert_array_equal(cs.total, cs.observed_part + cs.missing_part)
    assert np.all(cs.missing_part[data.complete] == 0)


def test_rank2_completion_matches_linear_algebra_oracle():
    g = make_grid(0, 1, 101)
    moments, sys = true_moments(g)
    lam, phi = scenario1_basis(g)
    u = np.array([[0.4, -0.15], [-0.7, 0.2]])
    x = u @ phi
    mask = mask_outside(np.full(2, 0.6), np.full(2, 0.8), g)
    d = FunctionalDataset(g, x, mask, [0.0, 1.0])
    cs = complete_missing_scores(d, moments, sys, 2, RidgeCompletionConfig(1e-8))
    # oracle: the observed fragment pins down both scores by least squares
    oracle = np.vstack([np.linalg.lstsq(phi[:, mask[i]].T, x[i, mask[i]], rcond=None)[0] for i in range(2)])
    np.testing.assert_allclose(oracle, u, atol=1e-12)
    np.testing.assert_allclose(cs.total, oracle, atol=1e-2)


def test_reconstruction_of_missing_segment():
    g = make_grid(0, 1, 101)
    moments, sys = true_moments(g)
    _, phi = scenario1_basis(g)
    x = np.array([[0.5, 0.2], [-0.3, 0.25]]) @ phi
    mask = mask_outside(np.full(2, 0.2), np.full(2, 0.4), g)
    d = FunctionalDataset(g, x, mask, [0.0, 1.0])
    cs = complete_missing_scores(d, moments, sys, 2, RidgeCompletionConfig(1e-8))
    recon = reconstruct_curve(sys, cs.total, 2)
    assert np.abs(recon - x)[~mask].max() < 1e-2


def test_reconstruct_mean_curve():
    data, _ = scenario1(n=30, a2=0.0)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    np.testing.assert_allclose(reconstruct_curve(sys, np.zeros(2), 2), pm.mean, atol=1e-10)


def test_reconstruct_full_curve_projection_error():
    g = make_grid(0, 1, 101)
    _, sys = true_moments(g)
    _, phi = scenario1_basis(g)
    x = np.array([0.8, -0.3]) @ phi
    d = FunctionalDataset(g, np.vstack([x, -x]), np.ones((2, 101), bool), [0, 1])
    recon = reconstruct_curve(sys, complete_scores(d, sys, 2)[0], 2)
    assert np.abs(recon - x).max() < 1e-3


def test_reconstruct_rejects_large_m():
    g = make_grid(0, 1, 11)
    _, sys = true_moments(g)
    with pytest.raises(InvalidArgumentError):
        reconstruct_curve(sys, np.zeros(3), 3)


def test_gcv_prefers_vanishing_ridge_for_rank2():
    # moments of an exactly rank-2 sample, so C_OO is well conditioned on its
    # rank; pairwise estimates from fragments are not exactly rank 2
    data, truth = scenario1(n=100, a2=0.2, seed=2, noise_sd_model=0.0)
    pm = partial_moments(truth.complete)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    rho, flags = select_rho_gcv(data, pm, sys, 2, RidgeCompletionConfig(rho_grid=(1e-8, 1.0)))
    assert rho == 1e-8 and not flags


def test_gcv_without_incomplete_curves_falls_back():
    data, _ = scenario1(n=30, a2=0.0)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    cfg = RidgeCompletionConfig(rho_grid=(1e-3, 1e-2, 1e-1))
    rho, flags = select_rho_gcv(data, pm, sys, 2, cfg)
    assert rho == 1e-2 and flags


def test_gcv_with_too_few_complete_curves_falls_back():
    data, _ = scenario1(n=40, a2=0.4, seed=1)
    keep = np.r_[np.flatnonzero(~data.complete), np.flatnonzero(data.complete)[:2]]
    sub = data.subset(keep)
    pm = partial_moments(sub)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    cfg = RidgeCompletionConfig(rho_grid=(1e-3, 1e-2, 1e-1))
    with pytest.warns(RuntimeWarning):
        cs = complete_missing_scores(sub, pm, sys, 2, cfg)
    assert cs.chosen_rho.max() == 1e-2 and cs.warnings


def test_gcv_single_candidate():
    data, _ = scenario1(n=60, a2=0.4, seed=1)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    assert select_rho_gcv(data, pm, sys, 2, RidgeCompletionConfig(rho_grid=(0.01,)))[0] == 0.01


def test_nme_equals_ori_on_complete_data():
    data, _ = scenario1(n=50, a2=0.0, seed=9)
    a = fit_nme(data).estimate
    b = fit_ori(data).estimate
    np.testing.assert_array_equal(a.gamma, b.gamma)
    assert a.intercept == b.intercept


def test_ridge_norm_decreases():
    data, _ = scenario1(n=60, a2=0.4, seed=4)
    pm = partial_moments(data)
    sys = eigendecompose(pm.cov, mean=pm.mean)
    mask = data.mask[np.flatnonzero(~data.complete)[0]]
    norms = [ridge_function(pm, sys, mask, 2, rho)[1] for rho in np.logspace(-8, 2, 25)]
    assert np.all(np.diff(np.array(norms), axis=0) <= 1e-12)


def test_completion_error_vanishes_for_rank2():
    g = make_grid(0, 1, 101)
    moments, sys = true_moments(g)
    mask = mask_outside(0.3, 0.5, g)
    v = completion_error(moments.cov.values, sys.eigenfunctions, mask, g)
    assert np.all(np.abs(v) < 1e-8)


def test_fit_nme_stage_label():
    g = make_grid(0, 1, 5)
    mask = np.array([[1, 1, 0, 0, 0], [0, 0, 1, 1, 1], [1, 1, 0, 0, 0]], bool)
    d = FunctionalDataset(g, np.ones((3, 5)), mask, [0, 1, 2])
    with pytest.raises(CoverageError) as err:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit_nme(d)
    assert err.value.stage == "partial_moments"
