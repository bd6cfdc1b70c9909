import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraglm.core import (
    FunctionalDataset,
    ObservedCurve,
    inner_product,
    interval_weights,
    make_grid,
    masked_inner_product,
)
from fraglm.exceptions import EmptySupportError, InvalidArgumentError

from .oracles import frozen


def test_two_point_grid():
    g = make_grid(0, 1, 2)
    np.testing.assert_array_equal(g.points, [0, 1])
    np.testing.assert_array_equal(g.weights, [0.5, 0.5])


def test_thirty_point_grid():
    g = make_grid(0, 1, 30)
    assert g.size == 30
    assert g.spacing == pytest.approx(1 / 29, rel=1e-14)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_five_points_on_0_2():
    np.testing.assert_allclose(make_grid(0, 2, 5).weights, [0.25, 0.5, 0.5, 0.5, 0.25])


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 1, 5), (2, 1, 5), (0, 1, 2.5)])
def test_make_grid_rejects(args):
    with pytest.raises(InvalidArgumentError):
        make_grid(*args)


@given(
    st.floats(-50, 50),
    st.floats(1e-3, 50),
    st.integers(2, 400),
)
def test_grid_invariants(t_min, length, p):
    g = make_grid(t_min, t_min + length, p)
    assert g.points[0] == g.t_min and g.points[-1] == g.t_max
    assert np.all(np.diff(g.points) > 0)
    # points carry rounding of order ulp(|t|), so uniformity is relative to the
    # magnitude of the points, not of the (possibly tiny) spacing
    scale = max(abs(g.t_min), abs(g.t_max), g.length)
    np.testing.assert_allclose(np.diff(g.points), g.spacing, rtol=0, atol=1e-12 * scale)
    assert g.weights.sum() == pytest.approx(g.length, rel=1e-12)
    if p > 2:
        assert np.ptp(g.weights[1:-1]) <= 1e-12 * g.weights[1]
        assert g.weights[0] == pytest.approx(g.weights[1] / 2, rel=1e-12)


def test_inner_product_of_one_is_one():
    g = make_grid(0, 1, 30)
    assert inner_product(np.ones(30), np.ones(30), g) == pytest.approx(1.0, abs=1e-14)


def test_sine_norm_and_orthogonality():
    g = make_grid(0, 1, 201)
    f = np.sqrt(2) * np.sin(np.pi * g.points / 2)
    h = np.sqrt(2) * np.sin(3 * np.pi * g.points / 2)
    assert inner_product(f, f, g) == pytest.approx(frozen.SIN_NORM_SQ, abs=1e-4)
    assert inner_product(f, h, g) == pytest.approx(frozen.SIN_CROSS, abs=1e-4)


def test_inner_product_length_mismatch():
    with pytest.raises(InvalidArgumentError):
        inner_product(np.ones(3), np.ones(4), make_grid(0, 1, 4))


def test_masked_full_mask_is_bitwise_inner_product():
    g = make_grid(0, 1, 37)
    rng = np.random.default_rng(0)
    f, h = rng.normal(size=(2, 37))
    assert masked_inner_product(f, h, np.ones(37, bool), g) == inner_product(f, h, g)


def test_masked_half_interval():
    g = make_grid(0, 1, 41)
    mask = g.points <= 0.5
    ones = np.ones(41)
    assert masked_inner_product(ones, ones, mask, g) == pytest.approx(0.5, abs=g.spacing)


def test_masked_two_fragments():
    g = make_grid(0, 1, 41)
    mask = (g.points <= 0.25) | (g.points >= 0.75)
    ones = np.ones(41)
    assert masked_inner_product(ones, ones, mask, g) == pytest.approx(0.5, abs=g.spacing)


def test_masked_empty_support():
    g = make_grid(0, 1, 5)
    with pytest.raises(EmptySupportError):
        masked_inner_product(np.ones(5), np.ones(5), np.zeros(5, bool), g)


def test_masked_ignores_values_under_false_flags():
    g = make_grid(0, 1, 6)
    mask = np.array([1, 1, 0, 0, 1, 1], bool)
    f = np.array([1.0, 2.0, np.nan, np.inf, 3.0, 4.0])
    ref = np.where(mask, f, 0.0)
    assert masked_inner_product(f, np.ones(6), mask, g) == masked_inner_product(ref, np.ones(6), mask, g)


def test_isolated_point_has_no_mass():
    np.testing.assert_array_equal(interval_weights([0, 1, 0, 1, 1], 1.0), [0, 0, 0, 0.5, 0.5])


polys = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


@given(polys, polys, st.integers(2, 200), st.floats(-5, 5), st.floats(0.01, 10))
def test_quadrature_exact_for_degree_one(p, q, n, t0, length):
    # one factor constant, the other affine, so the product has degree <= 1
    g = make_grid(t0, t0 + length, n)
    a, b = p
    c, _ = q
    f = a + b * g.points
    h = np.full(n, c)
    t1 = t0 + length
    exact = c * (a * length + b * (t1**2 - t0**2) / 2)
    assert inner_product(f, h, g) == pytest.approx(exact, rel=1e-12, abs=1e-12 * (1 + abs(exact)))


@given(
    st.lists(st.floats(-10, 10), min_size=8, max_size=8),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_bilinearity(vals, a, b):
    g = make_grid(0, 1, 8)
    f = np.array(vals)
    h = f[::-1] ** 2
    k = np.cos(np.arange(8.0))
    lhs = inner_product(a * f + b * h, k, g)
    rhs = a * inner_product(f, k, g) + b * inner_product(h, k, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12 * (1 + np.abs(f).max() + np.abs(h).max()))


@given(st.lists(st.booleans(), min_size=6, max_size=60))
def test_mask_additivity_within_boundary_tolerance(flags):
    mask = np.array(flags)
    if mask.all() or not mask.any():
        return
    n = mask.size
    g = make_grid(0, 1, n)
    f = np.sin(3 * g.points) + 2
    total = inner_product(f, f, g)
    # isolated points and run ends lose half weights; the loss is bounded by
    # the number of boundaries, hence the bound 2 * spacing * max|fg| per switch
    switches = int(np.sum(mask[1:] != mask[:-1]))
    split = masked_inner_product(f, f, mask, g) + masked_inner_product(f, f, ~mask, g)
    assert abs(total - split) <= switches * g.spacing * np.max(f * f) + 1e-12


def test_curve_and_dataset_mask_values():
    g = make_grid(0, 1, 4)
    c = ObservedCurve([1.0, 2.0, 3.0, 4.0], [True, False, True, True])
    assert np.isnan(c.values[1]) and not c.is_complete
    np.testing.assert_array_equal(c.observed(), [1, 3, 4])
    d = FunctionalDataset.from_curves(g, [c, ObservedCurve(np.ones(4), np.ones(4, bool))], [0, 1])
    assert d.n == 2
    np.testing.assert_array_equal(d.complete, [False, True])


@pytest.mark.parametrize(
    "values, mask, y",
    [
        (np.ones((1, 3)), np.ones((1, 3), bool), [1.0]),  # n < 2
        (np.ones((2, 3)), np.ones((2, 3), bool), [1.0]),  # response count
        (np.ones((2, 3)), np.array([[1, 1, 1], [0, 0, 0]], bool), [1.0, 2.0]),  # empty curve
        (np.array([[1, np.nan, 1], [1, 1, 1.0]]), np.ones((2, 3), bool), [1.0, 2.0]),
    ],
)
def test_dataset_validation(values, mask, y):
    with pytest.raises(InvalidArgumentError):
        FunctionalDataset(make_grid(0, 1, 3), values, mask, y)
