import math

import numpy as np
import pytest
from scipy import stats

from logcoreset.coreset import (
    RecursionConfig,
    build_base,
    build_recursive,
    build_uniform,
    default_levels,
    level_epsilon,
    size_for_epsilon,
)
from logcoreset.data import Dataset, fold_labels
from logcoreset.instances import gen_appendix_d, gen_mixture
from logcoreset.logreg import nll
from logcoreset.sampler import SampleSizeParams, round_pow2, sample_size
from logcoreset.scores import SketchConfig, sqrt_leverage_exact


def _band(p, trials, level=0.99):
    lo, hi = stats.binom.interval(level, trials, p)
    return lo, hi


def _mixture(n, d, seed=0, intercept=False):
    return fold_labels(gen_mixture(n, d, 1.0, seed), add_intercept=intercept)


# -- base coreset ----------------------------------------------------------------------------


def test_single_row_dataset():
    ds = Dataset([[1.5, -2.0]], [3.0])
    cs = build_base(ds, 3, seed=4)
    np.testing.assert_array_equal(cs.indices, [0, 0, 0])
    np.testing.assert_array_equal(cs.points, np.repeat(ds.X, 3, axis=0))
    np.testing.assert_allclose(cs.u, 1.0, rtol=1e-15)
    assert cs.meta["passes"] == 1


@pytest.mark.parametrize("method", ["exact_qr", "sketched"])
def test_deterministic(method):
    ds = _mixture(3000, 3)
    a = build_base(ds, 200, method, seed=5)
    b = build_base(ds, 200, method, seed=5)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.u, b.u)
    assert not np.array_equal(a.indices, build_base(ds, 200, method, seed=6).indices)


def test_weights_match_rounded_scores():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.standard_normal((300, 3)), rng.uniform(0.5, 2.0, 300))
    k = 40
    cs = build_base(ds, k, seed=2)
    rs = round_pow2(sqrt_leverage_exact(ds), ds.w)
    expected = rs.total_prime * ds.w[cs.indices] / (rs.s_prime[cs.indices] * k)
    np.testing.assert_allclose(cs.u, expected, rtol=1e-14)
    np.testing.assert_array_equal(cs.points, ds.X[cs.indices])


def test_sketched_path_meta_and_weights():
    ds = _mixture(4000, 3)
    cfg = SketchConfig.default(ds.n, ds.d, seed=3)
    cs = build_base(ds, 100, "sketched", cfg, seed=3)
    assert cs.meta["passes"] == 2
    assert cs.meta["method"] == "qr_sketch"
    assert np.all(cs.u > 0)
    # the estimator stays close to the data mass at beta = 0
    assert cs.u.sum() == pytest.approx(ds.n, rel=0.5)


def test_unknown_score_method():
    with pytest.raises(ValueError):
        build_base(Dataset([[1.0]], [1.0]), 1, "svd")


def test_extremes_inclusion_frequency():
    ds = fold_labels(gen_appendix_d(500), add_intercept=True)
    extremes = (0, 501)
    rs = round_pow2(sqrt_leverage_exact(ds), ds.w)
    p = rs.s_prime[0] / rs.total_prime
    assert rs.s_prime[501] == rs.s_prime[0]
    k, seeds = 50, 50
    one = 1 - (1 - p) ** k
    both = 1 - 2 * (1 - p) ** k + (1 - 2 * p) ** k
    hits_one = hits_both = 0
    for seed in range(seeds):
        idx = set(build_base(ds, k, seed=seed).indices.tolist())
        hits_one += extremes[0] in idx
        hits_both += extremes[0] in idx and extremes[1] in idx
    lo, hi = _band(one, seeds)
    assert lo <= hits_one <= hi
    lo, hi = _band(both, seeds)
    assert lo <= hits_both <= hi


# -- uniform -----------------------------------------------------------------------------------


def test_uniform_k1():
    ds = Dataset(np.arange(5.0)[:, None], [1.0, 2.0, 3.0, 4.0, 5.0])
    cs = build_uniform(ds, 1, seed=0)
    j = cs.indices[0]
    assert cs.u[0] == ds.n * ds.w[j]


def test_uniform_misses_extremes():
    ds = fold_labels(gen_appendix_d(500), add_intercept=True)
    p = 1 - (1 - 2 / 1002) ** 50
    assert p == pytest.approx(0.095, abs=5e-4)
    hits = sum(bool({0, 501} & set(build_uniform(ds, 50, seed).indices.tolist())) for seed in range(100))
    lo, hi = _band(p, 100)
    assert lo <= hits <= hi
    assert hits <= 25


def test_uniform_unbiased():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.standard_normal((20, 2)), np.ones(20))
    beta = np.array([1.0, -0.5])
    vals = np.array([build_uniform(ds, 5, s).loss(beta) for s in range(4000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - nll(ds, beta)) <= 3 * se


def test_uniform_rejects_zero():
    with pytest.raises(ValueError):
        build_uniform(Dataset([[1.0]], [1.0]), 0)


# -- mass conservation and embedding ------------------------------------------------------------


def test_weight_mass_conserved():
    rng = np.random.default_rng(3)
    ds = Dataset(rng.standard_normal((5, 2)), rng.uniform(0.5, 2.0, 5))
    rs = round_pow2(sqrt_leverage_exact(ds), ds.w)
    mass = np.zeros((10_000, 5))
    for s in range(mass.shape[0]):
        cs = build_base(ds, 3, seed=s, rounded=rs)
        np.add.at(mass[s], cs.indices, cs.u)
    se = mass.std(axis=0, ddof=1) / math.sqrt(mass.shape[0])
    assert np.all(np.abs(mass.mean(axis=0) - ds.w) <= 3 * se)


def test_l1_embedding_small():
    ds = _mixture(5000, 4)
    A = ds.dense_weighted()
    B = np.random.default_rng(4).standard_normal((4, 300))
    full = np.abs(A @ B).sum(axis=0)
    ok = 0
    for seed in range(10):
        cs = build_base(ds, 1000, seed=seed)
        T = np.abs(cs.as_dataset().dense_weighted() @ B).sum(axis=0)
        ok += np.all(np.abs(T - full) <= 0.3 * full)
    assert ok >= 9


# -- recursion ---------------------------------------------------------------------------------------


def test_default_levels():
    assert default_levels(10**6) == 5
    assert default_levels(16) == 2
    assert default_levels(2) == 1


def test_level_epsilon_schedule():
    assert level_epsilon(0.3, 2.0, 0, 1) == pytest.approx(0.3 / (2 * math.sqrt(3)))
    assert level_epsilon(0.3, 1.0, 2, 5) == pytest.approx(0.3 / (10 * math.sqrt(2) * 1.3**2))


def test_recursion_config_validation():
    with pytest.raises(ValueError):
        RecursionConfig(0.5)
    with pytest.raises(ValueError):
        RecursionConfig(0.1, mu_hint=0.5)
    with pytest.raises(ValueError):
        RecursionConfig(0.1, levels=0)
    with pytest.raises(ValueError):
        build_recursive(_mixture(100, 3), RecursionConfig(0.1, min_size=2))


def test_recursion_below_min_size_is_base():
    ds = _mixture(600, 2)
    cfg = RecursionConfig(0.3, mu_hint=2.0, min_size=1000, seed=8, scale_const=1e-4)
    rec = build_recursive(ds, cfg)
    k = size_for_epsilon(ds, 0.3, ds.n**-2.0, 2.0, scale_const=1e-4)
    base = build_base(ds, k, seed=8)
    assert np.array_equal(rec.indices, base.indices)
    assert np.array_equal(rec.u, base.u)
    assert rec.meta["levels"] == 0


def test_recursion_single_level_schedule():
    ds = _mixture(20_000, 2)
    eps, mu, c = 0.3, 2.0, 2e-5
    delta = ds.n**-2.0
    rec = build_recursive(ds, RecursionConfig(eps, mu, levels=1, min_size=100, seed=1, scale_const=c))
    assert rec.meta["levels"] == 1
    sizes = rec.meta["level_sizes"]
    assert len(sizes) == 2
    eps0 = eps / (2 * math.sqrt(mu + 1))
    assert sizes[1] == size_for_epsilon(ds, eps0, delta, mu, scale_const=c)
    assert sizes[1] < ds.n
    assert rec.k < sizes[1]


def test_recursion_points_and_weights_compose():
    ds = _mixture(20_000, 2)
    rec = build_recursive(ds, RecursionConfig(0.3, 1.0, levels=2, min_size=100, seed=2, scale_const=2e-5))
    np.testing.assert_array_equal(rec.points, ds.X[rec.indices])
    assert rec.meta["method"] == "qr_recursive"
    assert rec.u.sum() == pytest.approx(ds.n, rel=0.3)


def test_recursion_early_exit_when_size_reaches_n():
    ds = _mixture(3000, 2)
    rec = build_recursive(ds, RecursionConfig(0.1, 1.0, min_size=100))
    # the default constant asks for more rows than exist: no level runs and the final stage keeps k = n
    assert rec.meta["levels"] == 0
    assert rec.k == ds.n


def test_size_for_epsilon_matches_sampler():
    ds = _mixture(2000, 3)
    rs = round_pow2(sqrt_leverage_exact(ds), ds.w)
    k = sample_size(rs, SampleSizeParams(0.2, 0.01, 1e-3), 2.0, ds.d)
    assert size_for_epsilon(ds, 0.2, 0.01, 2.0, scale_const=1e-3) == k
