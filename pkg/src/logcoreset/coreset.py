"""Coreset builders: square-root leverage sampling, its recursive form, and uniform sampling."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .data import Dataset
from .logreg import nll
from .sampler import (
    RoundedScores,
    SampleSizeParams,
    WeightedReservoirs,
    round_exponents,
    round_pow2,
    sample_iid,
    sample_size,
)
from .scores import SketchConfig, sketched_score_chunks, sqrt_leverage_exact

SCORE_METHODS = ("exact_qr", "sketched")


@dataclass(frozen=True)
class Coreset:
    """Sampled rows with reweighting values ``u``; repeated draws stay separate rows."""

    indices: np.ndarray
    points: np.ndarray
    u: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.indices.shape[0]

    def as_dataset(self, has_intercept: bool = False) -> Dataset:
        return Dataset(self.points, self.u, has_intercept)

    def loss(self, beta) -> float:
        return nll(self.as_dataset(), beta)


def _with_weights(ds: Dataset, idx, u, meta) -> Coreset:
    return Coreset(np.asarray(idx, dtype=np.int64), ds.X[idx], u, meta)


def build_base(ds: Dataset, k: int, score_method: str = "exact_qr",
               sketch_cfg: SketchConfig | None = None, seed: int = 0,
               rounded: RoundedScores | None = None) -> Coreset:
    """Sample ``k`` rows with probability ``s'_i / S'`` and weight ``u = S' w_j / (s'_j k)``.

    ``exact_qr`` factors ``D_w X`` in memory and samples i.i.d.; ``sketched``
    makes two passes (CountSketch, then scores fed straight into ``k``
    weighted reservoirs). ``rounded`` reuses already computed exact scores.
    """
    if k < 1:
        raise ValueError("size must be >= 1")
    if ds.n < 1:
        raise ValueError("dataset is empty")
    t0 = time.perf_counter()
    if score_method == "exact_qr":
        rs = rounded if rounded is not None else round_pow2(sqrt_leverage_exact(ds), ds.w)
        idx = sample_iid(rs, k, seed)
        s_prime, total, passes = rs.s_prime, rs.total_prime, 1
    elif score_method == "sketched":
        cfg = sketch_cfg or SketchConfig.default(ds.n, ds.d, seed)
        res = WeightedReservoirs(k, seed)
        s_prime = np.empty(ds.n)
        for lo, s in sketched_score_chunks(ds, cfg):
            w = ds.w[lo:lo + s.size]
            sp_chunk = np.ldexp(w, round_exponents(s, w))
            s_prime[lo:lo + s.size] = sp_chunk
            res.feed(np.arange(lo, lo + s.size), sp_chunk)
        idx = res.result()
        total, passes = res.running, 2
    else:
        raise ValueError(f"unknown score method {score_method!r}")
    u = total * ds.w[idx] / (s_prime[idx] * k)
    meta = {
        "method": "qr_sketch" if score_method == "sketched" else "qr",
        "seed": seed,
        "k": k,
        "passes": passes,
        "score_method": score_method,
        "wall_ms": 1e3 * (time.perf_counter() - t0),
    }
    return _with_weights(ds, idx, u, meta)


def build_uniform(ds: Dataset, k: int, seed: int = 0) -> Coreset:
    """Uniform rows with ``u = n w_j / k``, which keeps ``f_u`` unbiased for ``f_w``."""
    if k < 1:
        raise ValueError("size must be >= 1")
    t0 = time.perf_counter()
    idx = np.random.default_rng(seed).integers(0, ds.n, size=k)
    u = ds.n * ds.w[idx] / k
    meta = {"method": "uniform", "seed": seed, "k": k, "passes": 1, "score_method": None,
            "wall_ms": 1e3 * (time.perf_counter() - t0)}
    return _with_weights(ds, idx, u, meta)


def size_for_epsilon(ds: Dataset, epsilon: float, delta: float, mu: float,
                     score_method: str = "exact_qr", sketch_cfg: SketchConfig | None = None,
                     scale_const: float = 0.5) -> int:
    """Sample size implied by ``epsilon`` for the scores of ``ds``."""
    rs = _rounded_scores(ds, score_method, sketch_cfg)
    return sample_size(rs, SampleSizeParams(epsilon, delta, scale_const), mu, ds.d)


def _rounded_scores(ds, score_method, sketch_cfg) -> RoundedScores:
    if score_method == "exact_qr":
        return round_pow2(sqrt_leverage_exact(ds), ds.w)
    cfg = sketch_cfg or SketchConfig.default(ds.n, ds.d)
    s = np.concatenate([c for _, c in sketched_score_chunks(ds, cfg)])
    return round_pow2(s, ds.w)


def _reusable(rs, score_method):
    # sketched scores are recomputed inside the streaming pass
    return rs if score_method == "exact_qr" else None


@dataclass(frozen=True)
class RecursionConfig:
    """Settings for repeated subsampling.

    ``mu_hint`` is the assumed complexity of the input. ``levels`` defaults to
    ``ceil(log2 log2 n)``. ``delta`` is the failure probability per level,
    ``n**-2`` when unset.
    """

    epsilon: float
    mu_hint: float = 1.0
    levels: int | None = None
    min_size: int = 1000
    seed: int = 0
    delta: float | None = None
    scale_const: float = 0.5

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.mu_hint < 1:
            raise ValueError("mu_hint must be >= 1")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be >= 1")


def default_levels(n: int) -> int:
    return max(1, math.ceil(math.log2(math.log2(n)))) if n >= 4 else 1


def level_epsilon(epsilon: float, mu: float, level: int, levels: int) -> float:
    return epsilon / (2 * levels * math.sqrt(mu + 1) * (1 + epsilon) ** level)


def build_recursive(ds: Dataset, cfg: RecursionConfig, score_method: str = "exact_qr",
                    sketch_cfg: SketchConfig | None = None) -> Coreset:
    """Shrink ``ds`` by repeated sampling with tightened error budgets, then sample once at ``epsilon``.

    Level ``i`` targets ``epsilon_i = epsilon / (2 l sqrt(mu + 1) (1 + epsilon)^i)``
    with complexity ``mu_i = mu (1 + epsilon)^i``. A level whose sample size
    reaches the current row count ends the recursion. Weights compose because
    each level reweights the already weighted rows.
    """
    if cfg.min_size < ds.d + 1:
        raise ValueError("min_size must be >= d + 1")
    t0 = time.perf_counter()
    n0 = ds.n
    levels = cfg.levels or default_levels(n0)
    delta = cfg.delta if cfg.delta is not None else min(0.5, n0 ** -2.0)
    cur, src = ds, np.arange(n0)
    sizes = [n0]
    done = 0
    for i in range(levels):
        if cur.n <= cfg.min_size:
            break
        mu_i = cfg.mu_hint * (1 + cfg.epsilon) ** i
        eps_i = level_epsilon(cfg.epsilon, cfg.mu_hint, i, levels)
        rs = _rounded_scores(cur, score_method, sketch_cfg)
        k_i = sample_size(rs, SampleSizeParams(eps_i, delta, cfg.scale_const), mu_i, cur.d)
        if k_i >= cur.n:
            break
        level_seed = _rng.derive_seed(cfg.seed, i + 1)
        cs = build_base(cur, k_i, score_method, sketch_cfg, level_seed, _reusable(rs, score_method))
        src = src[cs.indices]
        cur = Dataset(cs.points, cs.u, ds.has_intercept)
        sizes.append(cur.n)
        done += 1

    mu_final = cfg.mu_hint * (1 + cfg.epsilon) ** done
    rs = _rounded_scores(cur, score_method, sketch_cfg)
    k = sample_size(rs, SampleSizeParams(cfg.epsilon, delta, cfg.scale_const), mu_final, cur.d)
    final = build_base(cur, k, score_method, sketch_cfg, cfg.seed, _reusable(rs, score_method))
    meta = dict(final.meta)
    meta.update(
        method="qr_recursive",
        epsilon=cfg.epsilon,
        levels=done,
        level_sizes=sizes,
        wall_ms=1e3 * (time.perf_counter() - t0),
    )
    return Coreset(src[final.indices], final.points, final.u, meta)
