"""Sensitivity upper bounds ``s_i = ||U_i||_2 + w_i / W`` for each row.

``U`` is an orthonormal basis of the column space of ``D_w X``. The exact
route factors ``D_w X`` directly; the sketched route factors a CountSketch of
it and estimates the row norms of ``D_w X R^-1`` with a Gaussian projection,
touching the data in two passes.

Scores here omit the ``(20 + 2 mu)`` multiplier. It cancels in the sampling
probabilities and is applied only when a sample size is derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _rng
from .data import Dataset

CHUNK_ROWS = 8192


@dataclass(frozen=True)
class ScoreVector:
    s: np.ndarray
    total: float
    method: str
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SketchConfig:
    """CountSketch rows, Gaussian embedding width and seed.

    ``repeats > 1`` takes the coordinate-wise median of the row scores over
    independent sketches.
    """

    sketch_rows: int
    jl_dim: int
    seed: int = 0
    repeats: int = 1

    def __post_init__(self):
        if self.sketch_rows < 1 or self.jl_dim < 1 or self.repeats < 1:
            raise ValueError("sketch_rows, jl_dim and repeats must be positive")

    @classmethod
    def default(cls, n: int, d: int, seed: int = 0) -> "SketchConfig":
        return cls(
            sketch_rows=max(100, 20 * d * d),
            jl_dim=max(20, math.ceil(8 * math.log(max(n, 2)))),
            seed=seed,
        )


class SketchError(RuntimeError):
    pass


def iter_row_chunks(ds: Dataset, chunk: int = CHUNK_ROWS):
    """Yield ``(start, X_rows, w_rows)`` blocks in row order; stands in for a file pass."""
    for lo in range(0, ds.n, chunk):
        hi = min(lo + chunk, ds.n)
        yield lo, ds.X[lo:hi], ds.w[lo:hi]


def _rank(R: np.ndarray, scale_ref: float | None = None) -> int:
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return 0
    ref = diag[0] if scale_ref is None else scale_ref
    tol = max(R.shape) * np.finfo(float).eps * ref
    return int(np.sum(diag > tol))


def orthonormal_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis (n x r) of the column space of ``A`` via pivoted Householder QR."""
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    return Q[:, : _rank(R)]


def sketch_matrix(ds: Dataset, cfg: SketchConfig) -> np.ndarray:
    """CountSketch ``S D_w X``: row ``i`` lands in bucket ``h(i)`` with sign ``sigma(i)``.

    Bucket and sign are hashed from ``(seed, i)``; one pass over the rows.
    """
    out = np.zeros((cfg.sketch_rows, ds.d))
    for lo, Xc, wc in iter_row_chunks(ds):
        idx = np.arange(lo, lo + Xc.shape[0])
        h = _rng.hash64(cfg.seed, idx)
        bucket = (h % np.uint64(cfg.sketch_rows)).astype(np.int64)
        sign = np.where((h >> np.uint64(63)) == 1, -1.0, 1.0)
        S = sp.csr_matrix((sign * wc, (bucket, np.arange(len(idx)))), shape=(cfg.sketch_rows, len(idx)))
        out += np.asarray((S @ Xc).todense()) if sp.issparse(Xc) else S @ Xc
    return out


def sqrt_leverage_exact(ds: Dataset) -> ScoreVector:
    W = float(np.sum(ds.w))
    Q = orthonormal_basis(ds.dense_weighted())
    s = np.linalg.norm(Q, axis=1) + ds.w / W
    return ScoreVector(s, float(np.sum(s)), "exact_qr", {"rank": Q.shape[1]})


def _projection(ds: Dataset, sketch_seed: int, cfg: SketchConfig) -> np.ndarray:
    """Pass 1: sketch, factor, and return the d x m matrix ``R^-1 G``."""
    Xs = sketch_matrix(ds, SketchConfig(cfg.sketch_rows, cfg.jl_dim, sketch_seed))
    _, R, perm = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
    r = _rank(R)
    if r == 0:
        raise SketchError("sketch failed, increase sketch_rows")
    rng = np.random.Generator(np.random.Philox(key=(sketch_seed + 1) & ((1 << 64) - 1)))
    G = rng.standard_normal((r, cfg.jl_dim)) / math.sqrt(cfg.jl_dim)
    M = np.zeros((ds.d, cfg.jl_dim))
    # columns outside the leading rank-r pivot block are dropped (pseudo-inverse of the rank-r factor)
    M[perm[:r]] = scipy.linalg.solve_triangular(R[:r, :r], G)
    return M


def sketched_score_chunks(ds: Dataset, cfg: SketchConfig):
    """Two-pass score stream: yields ``(start, s_chunk)`` in row order after pass 1 finishes."""
    W = float(np.sum(ds.w))
    seeds = [cfg.seed] + [_rng.derive_seed(cfg.seed, r) for r in range(1, cfg.repeats)]
    projections = [_projection(ds, s, cfg) for s in seeds]
    for lo, Xc, wc in iter_row_chunks(ds):
        norms = [np.linalg.norm(np.asarray(Xc @ M) * wc[:, None], axis=1) for M in projections]
        est = norms[0] if len(norms) == 1 else np.median(norms, axis=0)
        yield lo, est + wc / W


def sqrt_leverage_sketched(ds: Dataset, cfg: SketchConfig) -> ScoreVector:
    s = np.concatenate([chunk for _, chunk in sketched_score_chunks(ds, cfg)])
    return ScoreVector(s, float(np.sum(s)), "sketched", {"sketch_rows": cfg.sketch_rows, "jl_dim": cfg.jl_dim})


def sensitivity_total_bound(sv: ScoreVector, mu: float, n: int, d: int) -> bool:
    """Check ``(20 + 2 mu) * sum(s) <= 44 mu sqrt(n d)``."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    return (20 + 2 * mu) * sv.total <= 44 * mu * math.sqrt(n * d)
