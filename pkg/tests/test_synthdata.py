"""Synthetic setups, embeddings and univariate families."""

from __future__ import annotations

import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from shiftmatch import synthdata as sd


def test_exponential_sin_truth():
    src, tgt = sd.gen_exponential_sin(sd.SetupConfig(n=10, m=10))
    assert src.truth == tgt.truth == 1.25


def test_same_law_when_mu_p_is_one():
    src, tgt = sd.generate(sd.SetupConfig(mu_p=1.0, n=5000, m=5000, seed=1))
    for j in range(2):
        assert stats.ks_2samp(src.x[:, j], tgt.x[:, j]).pvalue > 0.01


def test_source_law_parameters():
    src, _ = sd.generate(sd.SetupConfig(mu_p=0.5, n=200_000, m=1, seed=2))
    assert src.x[:, 0].mean() == pytest.approx(2.0, rel=0.02)
    src, _ = sd.generate(sd.SetupConfig(setup="normal_poly", mu_p=4.0, n=200_000, m=1, seed=2))
    assert src.x[:, 0].var() == pytest.approx(0.25, rel=0.02)


def test_labels_follow_definitions():
    src, _ = sd.generate(sd.SetupConfig(d0=3, d=5, n=50, m=1))
    nptest.assert_allclose(src.label, np.cos(src.x[:, 1]) * src.y + 1.0)
    src, _ = sd.generate(sd.SetupConfig(setup="normal_poly", d0=2, d=4, n=50, m=1))
    nptest.assert_allclose(src.label, src.y * (src.x[:, :2] ** 2).sum(axis=1))


def test_normal_poly_truths():
    assert sd.normal_poly_stated_truth(2) == 2.0
    assert sd.normal_poly_truth(2) == 8.0
    assert sd.normal_poly_h(np.zeros((1, 3)), np.zeros(1), 3)[0] == 0.0


def test_normal_poly_monte_carlo_oracle():
    _, tgt = sd.gen_normal_poly(sd.SetupConfig(setup="normal_poly", d0=2, d=2, n=1, m=10**6, seed=9))
    se = tgt.label.std(ddof=1) / np.sqrt(tgt.label.size)
    assert abs(tgt.label.mean() - sd.normal_poly_truth(2)) <= 3 * se
    assert abs(tgt.label.mean() - sd.normal_poly_stated_truth(2)) > 100 * se


def test_config_validation():
    with pytest.raises(ValueError):
        sd.SetupConfig(d0=3, d=2)
    with pytest.raises(ValueError):
        sd.SetupConfig(d0=1, d=1)
    with pytest.raises(ValueError):
        sd.SetupConfig(mu_p=0.0)
    with pytest.raises(ValueError):
        sd.SetupConfig(setup="uniform")
    sd.SetupConfig(setup="normal_poly", d0=1, d=1)


def test_reproducible_and_independent_streams():
    cfg = sd.SetupConfig(n=300, m=300, seed=123)
    a_src, a_tgt = sd.generate(cfg, key=(4, 7))
    b_src, b_tgt = sd.generate(cfg, key=(4, 7))
    nptest.assert_array_equal(a_src.x, b_src.x)
    nptest.assert_array_equal(a_tgt.label, b_tgt.label)
    c_src, _ = sd.generate(cfg, key=(4, 8))
    assert not np.array_equal(a_src.x, c_src.x)
    # source and target are drawn from different streams even at mu_p = 1
    d_src, d_tgt = sd.generate(sd.SetupConfig(mu_p=1.0, n=100, m=100, seed=5))
    assert not np.array_equal(d_src.x, d_tgt.x)


def test_stream_keys_do_not_collide():
    draws = {
        (s, key): sd.stream(s, *key).integers(0, 2**63)
        for s in range(4)
        for key in [(0,), (1,), (0, 0), (0, 1), (1, 0), (5, 0), (5, 1)]
    }
    assert len(set(draws.values())) == len(draws)


def test_embedding_identity_and_worked_example():
    base = np.random.default_rng(0).normal(size=(5, 3))
    nptest.assert_array_equal(sd.embed_manifold(base, 3), base)
    out = sd.embed_manifold(np.array([[2.0]]), 4)
    nptest.assert_allclose(out[0], [2.0, 4.0, np.cos(2.0), 0.2])
    with pytest.raises(ValueError):
        sd.embed_manifold(base, 2)


@settings(max_examples=30, deadline=None)
@given(d0=st.integers(1, 4), extra=st.integers(0, 12), seed=st.integers(0, 2**32 - 1))
def test_embedding_is_function_of_base(d0, extra, seed):
    base = np.random.default_rng(seed).normal(size=(20, d0))
    emb = sd.embed_manifold(base, d0 + extra)
    assert emb.shape == (20, d0 + extra)
    nptest.assert_array_equal(emb[:, :d0], base)
    nptest.assert_array_equal(sd.embed_manifold(emb[:, :d0], d0 + extra), emb)


def test_embedding_has_local_rank_d0():
    rng = np.random.default_rng(1)
    base = np.array([0.7, 1.3]) + 1e-6 * rng.normal(size=(200, 2))
    emb = sd.embed_manifold(base, 9)
    sv = np.linalg.svd(emb - emb.mean(axis=0), compute_uv=False)
    assert (sv[2:] ** 2).sum() / (sv**2).sum() < 1e-12


@pytest.mark.parametrize(
    "family, mean",
    [(sd.exponential(1.0), 1.0), (sd.gamma(2.0, 3.0), 1.5), (sd.gaussian(0.5, 2.0), 0.5)],
)
def test_family_means(family, mean):
    values, pdf = sd.gen_univariate_family(family, 10**6, seed=4)
    assert values.mean() == pytest.approx(mean, abs=0.01)
    assert family.mean() == pytest.approx(mean)
    assert np.all(pdf(values) > 0)


def test_pareto_support_and_density():
    fam = sd.pareto(2.5)
    values, pdf = sd.gen_univariate_family(fam, 10**5, seed=1)
    assert values.min() >= 1.0
    assert pdf(np.array([2.0]))[0] == pytest.approx(2.5 * 2.0 ** -3.5)
    assert stats.kstest(values, fam.dist.cdf).pvalue > 0.001


def test_family_validation():
    with pytest.raises(ValueError):
        sd.gamma(1.0, 0.5)
    with pytest.raises(ValueError):
        sd.exponential(-1.0)
    with pytest.raises(ValueError):
        sd.Family("cauchy", (1.0,))
    with pytest.raises(ValueError):
        sd.gen_univariate_family(sd.exponential(1.0), 0, seed=0)
