"""Power-of-two score rounding, sample sizes, and i.i.d. / reservoir index sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .scores import ScoreVector


@dataclass(frozen=True)
class RoundedScores:
    s_prime: np.ndarray
    total_prime: float
    num_classes: int


@dataclass(frozen=True)
class SampleSizeParams:
    """``scale_const`` stands in for the unspecified absolute constant of the sampling bound.

    The default is a tuned value, not one that certifies the (epsilon, delta)
    guarantee. ``vc_dim`` overrides the ``num_classes * (d + 1)`` estimate.
    """

    epsilon: float
    delta: float
    scale_const: float = 0.5
    vc_dim: int | None = None

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.scale_const > 0:
            raise ValueError("scale_const must be positive")


def round_exponents(s, w) -> np.ndarray:
    """Smallest integer ``e`` with ``w * 2**e >= s``, elementwise."""
    s = np.asarray(s, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    mant, exp = np.frexp(s / w)
    exp = np.where(mant == 0.5, exp - 1, exp)
    # s / w may have rounded down; the comparison below is exact
    exp = np.where(np.ldexp(w, exp) < s, exp + 1, exp)
    return exp


def round_pow2(sv: ScoreVector | np.ndarray, w) -> RoundedScores:
    """Round each ``s_i / w_i`` up to a power of two: ``s_i <= s'_i <= 2 s_i``."""
    s = sv.s if isinstance(sv, ScoreVector) else np.asarray(sv, dtype=np.float64)
    if not np.all(s > 0):
        raise ValueError("scores must be positive")
    exp = round_exponents(s, w)
    s_prime = np.ldexp(np.asarray(w, dtype=np.float64), exp)
    return RoundedScores(s_prime, float(np.sum(s_prime)), int(np.unique(exp).size))


def sample_size_bound(total_prime: float, num_classes: int, d: int, p: SampleSizeParams, mu: float) -> float:
    """Unrounded, unclamped sample size."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    s_eff = (20 + 2 * mu) * total_prime
    vc = p.vc_dim if p.vc_dim is not None else num_classes * (d + 1)
    return p.scale_const * s_eff / p.epsilon**2 * (vc * math.log(max(s_eff, math.e)) + math.log(1 / p.delta))


def sample_size(rs: RoundedScores, p: SampleSizeParams, mu: float, d: int) -> int:
    """Sample count for error ``epsilon``, clamped to ``[d + 1, n]``."""
    n = rs.s_prime.shape[0]
    raw = sample_size_bound(rs.total_prime, rs.num_classes, d, p, mu)
    k = math.ceil(raw) if raw < 1e18 else n
    return int(min(max(k, d + 1), n))


def sample_iid(rs: RoundedScores | np.ndarray, k: int, seed: int) -> np.ndarray:
    """``k`` indices drawn with replacement, ``P(i) = s'_i / S'`` (inverse CDF over prefix sums)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    s = rs.s_prime if isinstance(rs, RoundedScores) else np.asarray(rs, dtype=np.float64)
    cdf = np.cumsum(s)
    u = np.random.default_rng(seed).random(k) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), s.size - 1)


class WeightedReservoirs:
    """``k`` independent single-slot weighted reservoirs fed in one pass.

    On seeing row ``i`` a reservoir swaps in ``i`` with probability
    ``s_i / C_i`` (``C_i``: running score sum). Instead of a coin per row and
    reservoir, each reservoir draws ``U`` after a swap at running sum ``C``
    and swaps next at the first row whose running sum exceeds ``C / U``;
    the survival probability ``C / C_m`` is the same product of per-row
    coins, so the law of the held index is unchanged. Reservoir ``j`` uses
    its own counter-keyed stream ``(seed, j, draw)``.
    """

    def __init__(self, k: int, seed: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.seed = seed
        self.held = np.full(k, -1, dtype=np.int64)
        self.threshold = np.zeros(k)
        self.draws = np.zeros(k, dtype=np.int64)
        self.running = 0.0
        self._ids = np.arange(k)

    def feed(self, indices, scores) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.float64)
        if scores.size == 0:
            return
        if not np.all(scores > 0):
            raise ValueError("scores must be positive")
        cum = self.running + np.cumsum(scores)
        while True:
            active = np.flatnonzero(self.threshold < cum[-1])
            if active.size == 0:
                break
            pos = np.searchsorted(cum, self.threshold[active], side="right")
            self.held[active] = indices[pos]
            u = _rng.uniform01(self.seed, self._ids[active], self.draws[active])
            self.draws[active] += 1
            self.threshold[active] = cum[pos] / u
        self.running = float(cum[-1])

    def result(self) -> np.ndarray:
        if self.running == 0.0:
            raise ValueError("empty stream")
        return self.held.copy()


def reservoir_stream(rows, k: int, seed: int, chunk: int = 4096) -> np.ndarray:
    """Feed an iterable of ``(index, score)`` pairs to ``k`` weighted reservoirs."""
    res = WeightedReservoirs(k, seed)
    idx_buf, s_buf = [], []
    for i, s in rows:
        idx_buf.append(i)
        s_buf.append(s)
        if len(idx_buf) >= chunk:
            res.feed(idx_buf, s_buf)
            idx_buf, s_buf = [], []
    res.feed(idx_buf, s_buf)
    return res.result()
