"""Pointwise estimators, the target average and the ATE estimator."""

from __future__ import annotations

import warnings

import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftmatch.basis import build_basis, eval_monomials
from shiftmatch.estimators import (
    AtePanel,
    BelowTheoryThresholdWarning,
    ConfigError,
    Dataset,
    EstimatorConfig,
    estimate_ate,
    estimate_expectation,
    fsum_mean,
    pointwise_matching,
    pointwise_polynomial,
    predict_many,
)
from shiftmatch.neighbors import PointSet, build_index


def _index(x, norm="euclidean"):
    return build_index(PointSet(np.asarray(x, dtype=float).reshape(len(x), -1), norm))


def _random_poly(rng, d, L):
    basis = build_basis(d, L)
    coef = rng.normal(size=basis.kstar)

    def g(x):
        x = np.atleast_2d(x)
        return np.array([coef @ eval_monomials(basis, np.zeros(d), row) for row in x])

    return g


# -- pointwise matching -----------------------------------------------------

def test_single_source_point_is_censored_by_convention():
    # With n = k the (k+1)-th neighbour does not exist, so the radius is inf.
    data = Dataset([[0.3]], [2.0], [[0.0]])
    cfg = EstimatorConfig(k=1, r0=1.0)
    assert pointwise_matching(data, _index([[0.3]]), [0.0], cfg) == 0.0


def test_single_neighbour_mean():
    data = Dataset([[0.3], [0.9]], [2.0, 7.0], [[0.0]])
    cfg = EstimatorConfig(k=1, r0=1.0)
    assert pointwise_matching(data, _index(data.source_x), [0.0], cfg) == 2.0


def test_far_query_is_censored():
    data = Dataset([[0.3], [0.9]], [2.0, 7.0], [[0.0]])
    cfg = EstimatorConfig(k=1, r0=1.0)
    assert pointwise_matching(data, _index(data.source_x), [5.0], cfg) == 0.0


def test_two_neighbour_mean():
    x = [[0.1], [-0.2], [0.5]]
    data = Dataset(x, [1.0, 3.0, 100.0], [[0.0]])
    cfg = EstimatorConfig(k=2, r0=1.0)
    assert pointwise_matching(data, _index(x), [0.0], cfg) == 2.0
    literal = Dataset(x[:2], [1.0, 3.0], [[0.0]])
    assert pointwise_matching(literal, _index(x[:2]), [0.0], cfg) == 0.0


# -- pointwise polynomial ---------------------------------------------------

def test_line_fit_recovers_intercept():
    x = np.array([[0.1], [0.2], [0.3], [0.5]])
    labels = 2 * x[:, 0] + 1
    data = Dataset(x, labels, [[0.0]])
    cfg = EstimatorConfig(k=3, L=1, r0=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        got = pointwise_polynomial(data, _index(x), [0.0], cfg)
    assert abs(got - 1.0) <= 1e-9


def test_line_fit_literal_three_points_is_censored():
    x = np.array([[0.1], [0.2], [0.3]])
    data = Dataset(x, 2 * x[:, 0] + 1, [[0.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        got = pointwise_polynomial(data, _index(x), [0.0], EstimatorConfig(k=3, L=1))
    assert got == 0.0


def test_polynomial_censored_branch():
    rng = np.random.default_rng(0)
    x = rng.random((50, 2))
    data = Dataset(x, rng.normal(size=50), [[0.5, 0.5]])
    got = pointwise_polynomial(data, _index(x), [9.0, 9.0], EstimatorConfig(L=2, r0=1.0))
    assert got == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3), L=st.integers(0, 3))
def test_polynomial_reproduction(seed, d, L):
    rng = np.random.default_rng(seed)
    g = _random_poly(rng, d, L)
    x = rng.random((150, d))
    basis = build_basis(d, L)
    data = Dataset(x, g(x), x[:1])
    cfg = EstimatorConfig(k=max(2 * basis.kstar, 2), L=L, r0=np.inf)
    Z = 0.2 + 0.6 * rng.random((10, d))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        for z in Z:
            truth = g(z)[0]
            got = pointwise_polynomial(data, _index(x), z, cfg, basis)
            assert abs(got - truth) <= 1e-8 * (1 + abs(truth))


def test_l0_polynomial_equals_matching():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 2))
    data = Dataset(x, rng.normal(size=300), x[:1])
    idx = _index(x)
    for k in (1, 4):
        cfg = EstimatorConfig(k=k, L=0, r0=1.5)
        for z in rng.normal(size=(100, 2)):
            a = pointwise_polynomial(data, idx, z, cfg)
            b = pointwise_matching(data, idx, z, cfg)
            assert abs(a - b) <= 1e-12


def test_scale_invariance():
    rng = np.random.default_rng(2)
    x = rng.random((400, 2))
    labels = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 + 0.1 * rng.normal(size=400)
    data = Dataset(x, labels, x[:1])
    Z = 0.1 + 0.8 * rng.random((50, 2))
    a = predict_many(data, Z, EstimatorConfig(L=2, scale="radius"))
    b = predict_many(data, Z, EstimatorConfig(L=2, scale="unit"))
    nptest.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_collinear_neighbours_fall_back():
    x = np.column_stack([np.linspace(0, 1, 30), np.linspace(0, 1, 30)])
    data = Dataset(x, 3.0 + x[:, 0], [[0.5, 0.5]])
    rep = estimate_expectation(data, EstimatorConfig(k=6, L=1, r0=np.inf))
    assert rep.fallback_count == 1
    assert np.isfinite(rep.value)


def test_config_validation():
    with pytest.raises(ConfigError):
        EstimatorConfig(k=0)
    with pytest.raises(ConfigError):
        EstimatorConfig(r0=0.0)
    with pytest.raises(ConfigError):
        EstimatorConfig(norm="l7")
    with pytest.raises(ConfigError):
        EstimatorConfig(k=3, L=2).resolve(2)
    with pytest.warns(BelowTheoryThresholdWarning):
        EstimatorConfig(L=1).resolve(2)
    assert EstimatorConfig(L=2).resolve(3).k == 20
    assert EstimatorConfig().resolve(4).k == 2


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([[0.0, 1.0]], [1.0], [[0.0]])
    with pytest.raises(ValueError):
        Dataset([[0.0]], [1.0, 2.0], [[0.0]])
    with pytest.raises(ValueError):
        Dataset([[0.0]], [np.nan], [[0.0]])


# -- target average ---------------------------------------------------------

def test_target_equal_to_strictly_nearest_source_point():
    x = np.array([[0.0], [0.4], [1.0]])
    data = Dataset(x, [5.0, 6.0, 7.0], [[0.4]])
    assert estimate_expectation(data, EstimatorConfig(k=1)).value == 6.0


def test_identical_targets_average_to_pointwise_value():
    rng = np.random.default_rng(4)
    x = rng.random((80, 2))
    z = np.array([0.4, 0.6])
    data = Dataset(x, rng.normal(size=80), np.tile(z, (25, 1)))
    cfg = EstimatorConfig(L=1, k=12)
    point = pointwise_polynomial(data, _index(x), z, cfg)
    assert estimate_expectation(data, cfg).value == pytest.approx(point, rel=1e-14, abs=1e-15)


def test_too_few_sources_flags_full_censoring():
    data = Dataset([[0.0], [0.1]], [1.0, 1.0], [[0.0], [0.05]])
    rep = estimate_expectation(data, EstimatorConfig(k=2))
    assert rep.value == 0.0 and rep.censored_fraction == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_weighted_average_identity(seed):
    rng = np.random.default_rng(seed)
    x = rng.exponential(size=(200, 2))
    data = Dataset(x, rng.normal(1.0, 2.0, 200), rng.exponential(size=(150, 2)))
    rep = estimate_expectation(data, EstimatorConfig(k=3), return_weights=True)
    w = rep.per_source_weights
    assert np.all(w >= 0)
    assert abs(np.dot(w, data.source_label) - rep.value) <= 1e-10 * max(1.0, abs(rep.value))
    assert w.sum() == pytest.approx(1 - rep.censored_fraction)


def test_weights_rejected_for_polynomial_order():
    data = Dataset(np.random.default_rng(0).random((40, 1)), np.ones(40), [[0.5]])
    with pytest.raises(ConfigError):
        estimate_expectation(data, EstimatorConfig(L=1, k=4), return_weights=True)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_source_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((60, 2))
    labels = rng.normal(size=60)
    target = rng.random((30, 2))
    perm = rng.permutation(60)
    cfg = EstimatorConfig(k=3, L=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        a = estimate_expectation(Dataset(x, labels, target), cfg).value
        b = estimate_expectation(Dataset(x[perm], labels[perm], target), cfg).value
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_censored_fraction_non_increasing_in_r0():
    rng = np.random.default_rng(5)
    data = Dataset(rng.exponential(size=(100, 2)), rng.normal(size=100), rng.exponential(2, (200, 2)))
    fracs = [
        estimate_expectation(data, EstimatorConfig(k=2, r0=r0)).censored_fraction
        for r0 in (0.05, 0.1, 0.3, 1.0, 3.0, np.inf)
    ]
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))
    assert fracs[-1] == 0.0


def test_sampling_mode_matches_matching_when_h_ignores_target():
    rng = np.random.default_rng(6)
    x = rng.random((100, 2))
    y = rng.normal(size=100)

    def h(z, yy):
        return 2.0 * yy + 1.0

    data = Dataset(x, h(None, y), rng.random((40, 2)), source_y=y, h=h)
    a = estimate_expectation(data, EstimatorConfig(k=3)).value
    b = estimate_expectation(data, EstimatorConfig(k=3, label_mode="sampling")).value
    assert a == pytest.approx(b, rel=1e-14)


def test_sampling_mode_uses_target_point():
    x = np.array([[0.0, 0.0], [0.2, 0.0], [0.4, 0.0]])
    y = np.array([1.0, 2.0, 3.0])

    def h(z, yy):
        return z[..., 0] * yy

    data = Dataset(x, y, [[0.5, 0.0]], source_y=y, h=h)
    rep = estimate_expectation(data, EstimatorConfig(k=1, label_mode="sampling"))
    assert rep.value == pytest.approx(0.5 * 3.0)


def test_sampling_mode_requires_callback():
    data = Dataset([[0.0], [1.0]], [1.0, 2.0], [[0.1]])
    with pytest.raises(ConfigError):
        estimate_expectation(data, EstimatorConfig(k=1, label_mode="sampling"))


def test_fsum_mean_is_order_free():
    vals = np.array([1e16, 1.0, -1e16, 3.0])
    assert fsum_mean(vals) == fsum_mean(vals[::-1]) == 1.0


# -- ATE --------------------------------------------------------------------

def _constant_effect_panel(c=1.5):
    x = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    xs = np.concatenate([x, x + 0.01])
    w = np.array([1] * 5 + [0] * 5)
    g = 2 * xs
    return AtePanel(xs, w, g + c * w), c


def test_ate_hand_computed_constant_effect():
    panel, c = _constant_effect_panel()
    rep = estimate_ate(panel, EstimatorConfig(k=1, r0=np.inf))
    # every unit is matched to its twin 0.01 away on g(x) = 2x, so each term is c - 0.02
    assert rep.mu_hat == pytest.approx(c - 0.02, abs=1e-12)
    assert rep.censored_treated == rep.censored_control == 0.0
    assert not rep.empty_arm


def test_ate_dense_arms_recover_effect():
    rng = np.random.default_rng(8)
    x = rng.random(2000)
    w = (rng.random(2000) < 0.5).astype(int)
    y = np.sin(x) + 0.7 * w
    rep = estimate_ate(AtePanel(x, w, y), EstimatorConfig(k=1))
    spacing = max(np.diff(np.sort(x[w == 1])).max(), np.diff(np.sort(x[w == 0])).max())
    assert abs(rep.mu_hat - 0.7) <= spacing * 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(0, 1))
def test_ate_antisymmetry(seed, L):
    rng = np.random.default_rng(seed)
    x = rng.random((60, 2))
    w = rng.integers(0, 2, 60)
    y = rng.normal(size=60)
    panel = AtePanel(x, w, y)
    cfg = EstimatorConfig(k=4, L=L)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BelowTheoryThresholdWarning)
        assert estimate_ate(panel.flipped(), cfg).mu_hat == -estimate_ate(panel, cfg).mu_hat


def test_ate_small_treated_arm_censors_controls():
    x = np.array([0.0, 0.1, 0.2, 0.3, 0.05])
    w = np.array([0, 0, 0, 0, 1])
    y = np.array([1.0, 2.0, 3.0, 4.0, 10.0])
    rep = estimate_ate(AtePanel(x, w, y), EstimatorConfig(k=1))
    assert rep.censored_control == 1.0
    # treated unit: 10 - mean of its nearest control (x=0.0 and 0.1 tie at 0.05, index 0 wins)
    expected = ((10.0 - 1.0) - (1.0 + 2.0 + 3.0 + 4.0)) / 5
    assert rep.mu_hat == pytest.approx(expected)


def test_ate_empty_arm_is_flagged():
    rep = estimate_ate(AtePanel([0.0, 1.0], [1, 1], [2.0, 4.0]), EstimatorConfig(k=1))
    assert rep.empty_arm and rep.censored_treated == 1.0
    assert rep.mu_hat == 3.0
