import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from logcoreset import _rng
from logcoreset.data import Dataset
from logcoreset.logreg import softplus
from logcoreset.mu import mu_bruteforce
from logcoreset.scores import (
    ScoreVector,
    SketchConfig,
    SketchError,
    orthonormal_basis,
    sensitivity_total_bound,
    sketch_matrix,
    sqrt_leverage_exact,
    sqrt_leverage_sketched,
)


def svd_scores(ds):
    """Reference scores from an SVD basis of ``D_w X``."""
    A = ds.dense_weighted()
    U, sig, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(sig > max(A.shape) * np.finfo(float).eps * sig[0]))
    return np.linalg.norm(U[:, :r], axis=1) + ds.w / ds.w.sum()


def _random_ds(rng, n, d, weights=True):
    w = rng.uniform(0.5, 2.0, n) if weights else np.ones(n)
    return Dataset(rng.standard_normal((n, d)), w)


# -- exact scores --------------------------------------------------------------------


def test_exact_identity():
    sv = sqrt_leverage_exact(Dataset(np.eye(2), np.ones(2)))
    np.testing.assert_allclose(sv.s, [1.5, 1.5], rtol=1e-14)
    assert sv.total == pytest.approx(3.0)
    assert sv.method == "exact_qr"


def test_exact_two_equal_rows():
    sv = sqrt_leverage_exact(Dataset([[1.0], [1.0]], [1.0, 1.0]))
    np.testing.assert_allclose(sv.s, 1 / math.sqrt(2) + 0.5, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 30), st.integers(1, 5))
def test_exact_matches_svd(seed, n, d):
    rng = np.random.default_rng(seed)
    ds = _random_ds(rng, n, d)
    sv = sqrt_leverage_exact(ds)
    np.testing.assert_allclose(sv.s, svd_scores(ds), rtol=1e-9, atol=1e-12)
    assert sv.total == pytest.approx(sv.s.sum(), rel=1e-12)
    assert np.all(sv.s > 0)


def test_rank_deficient_basis():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((40, 2))
    X = np.column_stack([B, B @ [1.0, -2.0], np.zeros(40)])
    ds = Dataset(X, rng.uniform(0.5, 2, 40))
    sv = sqrt_leverage_exact(ds)
    assert sv.meta["rank"] == 2
    np.testing.assert_allclose(sv.s, svd_scores(ds), rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_squared_norms_sum_to_rank(seed, d):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 50))
    X = rng.standard_normal((n, d))
    if d > 1 and rng.random() < 0.5:
        X[:, -1] = X[:, 0]
    Q = orthonormal_basis(Dataset(X, rng.uniform(0.5, 2, n)).dense_weighted())
    assert np.sum(Q**2) == pytest.approx(np.linalg.matrix_rank(X), abs=1e-8)


def test_exact_sparse_equals_dense():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((60, 4)) * (rng.random((60, 4)) < 0.4)
    w = rng.uniform(0.5, 2, 60)
    np.testing.assert_allclose(sqrt_leverage_exact(Dataset(sp.csr_matrix(X), w)).s,
                               sqrt_leverage_exact(Dataset(X, w)).s, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_basis_invariance(seed):
    rng = np.random.default_rng(seed)
    ds = _random_ds(rng, 25, 3)
    M = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    moved = Dataset(ds.X @ M, ds.w)
    np.testing.assert_allclose(sqrt_leverage_exact(moved).s, sqrt_leverage_exact(ds).s, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_row_norm_identity(seed):
    rng = np.random.default_rng(seed)
    ds = _random_ds(rng, 30, 3)
    A = ds.dense_weighted()
    q = np.linalg.norm(orthonormal_basis(A), axis=1)
    for _ in range(10):
        v = A @ rng.standard_normal(3)
        assert np.all(np.abs(v) <= q * np.linalg.norm(v) + 1e-9)


def test_sensitivity_domination_small():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n, d = int(rng.integers(4, 41)), int(rng.integers(1, 4))
        ds = Dataset(rng.standard_normal((n, d)), rng.uniform(0.5, 2.0, n))
        mu = mu_bruteforce(ds, 2000 if d > 1 else None).mu_lower
        if not math.isfinite(mu):
            continue
        s = sqrt_leverage_exact(ds).s
        dirs = rng.standard_normal((d, 50))
        dirs /= np.linalg.norm(dirs, axis=0)
        for r in (0.1, 1.0, 10.0, 100.0):
            L = ds.w[:, None] * softplus(ds.X @ (r * dirs))
            share = L / L.sum(axis=0)
            assert np.all(share <= (20 + 2 * mu) * s[:, None] + 1e-9)


# -- sketch --------------------------------------------------------------------------


def test_sketch_single_row():
    ds = Dataset([[3.0, -1.0]], [2.0])
    Xs = sketch_matrix(ds, SketchConfig(7, 5, seed=11))
    nz = np.flatnonzero(np.any(Xs != 0, axis=1))
    assert nz.size == 1
    row = Xs[nz[0]]
    assert np.array_equal(row, [6.0, -2.0]) or np.array_equal(row, [-6.0, 2.0])


def test_sketch_deterministic():
    rng = np.random.default_rng(3)
    ds = _random_ds(rng, 1000, 4)
    cfg = SketchConfig(50, 10, seed=5)
    assert np.array_equal(sketch_matrix(ds, cfg), sketch_matrix(ds, cfg))


def test_sketch_collision_free_preserves_frobenius():
    ds = Dataset([[1.0, 2.0], [-3.0, 0.5], [0.0, 4.0]], [1.0, 2.0, 0.5])
    A = ds.dense_weighted()
    for seed in range(100):
        Xs = sketch_matrix(ds, SketchConfig(8, 4, seed=seed))
        rows = Xs[np.any(Xs != 0, axis=1)]
        if rows.shape[0] == 3:
            break
    else:
        pytest.fail("no collision-free seed found")
    # each occupied bucket holds exactly one signed input row
    for r in rows:
        assert any(np.array_equal(r, a) or np.array_equal(r, -a) for a in A)
    assert np.linalg.norm(Xs) == pytest.approx(np.linalg.norm(A), rel=1e-15)


def test_sketch_sparse_equals_dense():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((300, 3)) * (rng.random((300, 3)) < 0.5)
    w = rng.uniform(0.5, 2, 300)
    cfg = SketchConfig(40, 8, seed=9)
    np.testing.assert_allclose(sketch_matrix(Dataset(sp.csr_matrix(X), w), cfg),
                               sketch_matrix(Dataset(X, w), cfg), rtol=1e-13, atol=1e-13)


def test_sketched_scores_deterministic():
    rng = np.random.default_rng(5)
    ds = _random_ds(rng, 400, 3)
    cfg = SketchConfig.default(ds.n, ds.d, seed=3)
    a, b = sqrt_leverage_sketched(ds, cfg), sqrt_leverage_sketched(ds, cfg)
    assert np.array_equal(a.s, b.s)
    assert a.method == "sketched"


def test_default_sketch_config():
    cfg = SketchConfig.default(500, 5)
    assert cfg.sketch_rows == 500
    assert cfg.jl_dim == max(20, math.ceil(8 * math.log(500)))
    assert SketchConfig.default(10, 1).sketch_rows == 100


def _within_factor(exact, approx, c=4.0):
    ratio = exact / approx
    return ratio.max() <= c and ratio.min() >= 1 / c


def test_sketch_quality_500x5():
    rng = np.random.default_rng(6)
    ds = _random_ds(rng, 500, 5, weights=False)
    exact = sqrt_leverage_exact(ds).s
    good = sum(
        _within_factor(exact, sqrt_leverage_sketched(ds, SketchConfig(20 * 25, math.ceil(8 * math.log(500)), seed)).s)
        for seed in range(100)
    )
    assert good >= 90


def test_sketch_quality_single_column():
    rng = np.random.default_rng(7)
    ds = Dataset(rng.standard_normal((200, 1)), np.ones(200))
    exact = sqrt_leverage_exact(ds).s
    good = sum(
        _within_factor(exact, sqrt_leverage_sketched(ds, SketchConfig.default(200, 1, seed)).s)
        for seed in range(100)
    )
    assert good >= 90


def test_wide_projection_matches_right_factor():
    rng = np.random.default_rng(8)
    ds = _random_ds(rng, 50, 2)
    cfg = SketchConfig(30, 4096, seed=2)
    sv = sqrt_leverage_sketched(ds, cfg)
    # reference: unpivoted numpy QR of the same sketch
    _, R = np.linalg.qr(sketch_matrix(ds, cfg))
    ref = np.linalg.norm(ds.dense_weighted() @ np.linalg.inv(R), axis=1)
    est = sv.s - ds.w / ds.w.sum()
    np.testing.assert_allclose(est, ref, rtol=0.10)


def test_repeats_take_median():
    rng = np.random.default_rng(9)
    ds = _random_ds(rng, 200, 2)
    seeds = [1, _rng.derive_seed(1, 1), _rng.derive_seed(1, 2)]
    single = [sqrt_leverage_sketched(ds, SketchConfig(40, 20, seed=s)).s - ds.w / ds.w.sum() for s in seeds]
    three = sqrt_leverage_sketched(ds, SketchConfig(40, 20, seed=1, repeats=3)).s
    np.testing.assert_allclose(three, np.median(single, axis=0) + ds.w / ds.w.sum(), rtol=1e-14)


def test_zero_sketch_raises():
    ds = Dataset(np.zeros((5, 2)), np.ones(5))
    with pytest.raises(SketchError, match="increase sketch_rows"):
        sqrt_leverage_sketched(ds, SketchConfig(4, 3))


# -- total bound ---------------------------------------------------------------------


def test_total_bound_identity():
    sv = sqrt_leverage_exact(Dataset(np.eye(2), np.ones(2)))
    assert 22 * sv.total == pytest.approx(66.0)
    assert sensitivity_total_bound(sv, 1.0, 2, 2)


def test_total_bound_cauchy_schwarz_case():
    n, d = 16, 4
    sv = ScoreVector(np.full(n, math.sqrt(n * d) / n), math.sqrt(n * d), "exact_qr")
    assert sensitivity_total_bound(sv, 1.0, n, d)


def test_total_bound_inflated_scores_fail():
    sv = sqrt_leverage_exact(Dataset(np.eye(2), np.ones(2)))
    inflated = ScoreVector(10 * sv.s, 10 * sv.total, "sketched")
    assert not sensitivity_total_bound(inflated, 1.0, 2, 2)


def test_total_bound_rejects_small_mu():
    sv = sqrt_leverage_exact(Dataset(np.eye(2), np.ones(2)))
    with pytest.raises(ValueError):
        sensitivity_total_bound(sv, 0.5, 2, 2)
