"""Hard and synthetic instances (raw features, not folded)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledData


@dataclass(frozen=True)
class InstanceSpec:
    kind: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def generate(self) -> LabeledData:
        if self.kind == "appendix_d":
            return gen_appendix_d(self.n)
        if self.kind == "circle":
            return gen_circle(self.n, **self.params)
        if self.kind == "gaussian_mixture":
            return gen_mixture(self.n, seed=self.seed, **self.params)
        raise ValueError(f"unknown instance kind {self.kind!r}")


def gen_appendix_d(n: int) -> LabeledData:
    """Two mirrored classes on a line, ``m = 2n + 2`` points.

    Class -1 has one point at ``-n`` and ``n`` points at ``1``; class +1 has one
    point at ``+n`` and ``n`` points at ``-1``. Fold it with an intercept: the
    loss is minimized at ``beta = 0``, but without the two far points the rest
    is separable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z = np.concatenate([[-n], np.ones(n), [n], -np.ones(n)]).astype(np.float64)
    y = np.concatenate([-np.ones(n + 1), np.ones(n + 1)])
    return LabeledData(z[:, None], y, {"kind": "appendix_d", "n": n})


def gen_circle(n: int, hole_index: int | None = None, delta: float = 0.01,
               hole_present: bool = True) -> LabeledData:
    """Points ``p_j = (cos(j/n), sin(j/n))``, ``j = 1..n``, labeled +1.

    With ``hole_index = i`` the point ``(1 - delta) p_i`` is added with label -1.
    ``hole_present=False`` drops ``p_i`` from the +1 set; the instance is then
    separable by an affine hyperplane whenever ``delta < 1 - cos(1/n)``, which
    is recorded in ``meta["separable"]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if hole_index is not None and not 1 <= hole_index <= n:
        raise ValueError(f"hole_index must lie in 1..{n}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    j = np.arange(1, n + 1)
    if hole_index is not None and not hole_present:
        j = j[j != hole_index]
    pts = np.column_stack([np.cos(j / n), np.sin(j / n)])
    labels = np.ones(len(j))
    separable = hole_index is None
    if hole_index is not None:
        bob = (1 - delta) * np.array([np.cos(hole_index / n), np.sin(hole_index / n)])
        pts = np.vstack([pts, bob])
        labels = np.append(labels, -1.0)
        separable = not hole_present
    meta = {"kind": "circle", "n": n, "hole_index": hole_index, "delta": delta, "separable": separable}
    return LabeledData(pts, labels, meta)


def gen_mixture(n: int, d: int = 2, separation: float = 1.0, seed: int = 0) -> LabeledData:
    """``n / 2`` points per class from unit-covariance Gaussians at ``+-(separation / 2) e_1``."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    half = n // 2
    Z = rng.standard_normal((n, d))
    y = np.concatenate([np.ones(half), -np.ones(half)])
    Z[:, 0] += y * separation / 2
    perm = rng.permutation(n)
    return LabeledData(Z[perm], y[perm], {"kind": "gaussian_mixture", "separation": separation})
