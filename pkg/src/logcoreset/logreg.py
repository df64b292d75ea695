"""Weighted logistic loss ``f_w(X beta) = sum_i w_i * softplus(x_i @ beta)`` and its minimizer."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .data import Dataset


class FitError(RuntimeError):
    """The loss became non-finite during fitting."""


def softplus(z):
    """``ln(1 + e^z)`` without overflow: ``max(z, 0) + log1p(exp(-|z|))``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out if out.ndim else float(out)


def sigmoid(z):
    return expit(z)


def _margins(ds: Dataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.shape[0] != ds.d:
        raise ValueError(f"beta has {beta.shape[0]} entries, dataset has d={ds.d}")
    return np.asarray(ds.X @ beta).ravel()


def nll(ds: Dataset, beta) -> float:
    """Unnormalized weighted negative log-likelihood."""
    return float(np.sum(ds.w * softplus(_margins(ds, beta))))


def nll_grad(ds: Dataset, beta) -> np.ndarray:
    return np.asarray(ds.X.T @ (ds.w * sigmoid(_margins(ds, beta)))).ravel()


def nll_many(ds: Dataset, betas, chunk: int = 64) -> np.ndarray:
    """Loss for each column of ``betas`` (d x m), evaluated in column chunks."""
    betas = np.asarray(betas, dtype=np.float64)
    out = np.empty(betas.shape[1])
    for lo in range(0, betas.shape[1], chunk):
        Z = np.asarray(ds.X @ betas[:, lo:lo + chunk])
        out[lo:lo + chunk] = ds.w @ softplus(Z)
    return out


@dataclass(frozen=True)
class ModelParams:
    beta: np.ndarray


@dataclass(frozen=True)
class FitConfig:
    grad_tol: float = 1e-8
    max_iters: int = 10_000
    beta_norm_cap: float | None = None
    init: np.ndarray | None = None
    memory: int = 10

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


class FitResult(NamedTuple):
    params: ModelParams
    nll: float
    iters: int
    converged: bool


def fit_mle(ds: Dataset, cfg: FitConfig = FitConfig()) -> FitResult:
    """Minimize ``f_w`` by L-BFGS directions with Armijo backtracking.

    Stops when ``||grad||_inf <= grad_tol * min(sum(w), loss)``. Measuring the
    gradient against the loss keeps separable data (no finite minimizer, the
    gradient shrinks with the loss) from counting as converged; there the run
    ends at ``max_iters`` or, if ``beta_norm_cap`` is set, once
    ``||beta||_2`` exceeds it, with ``converged=False``. A loss that underflows
    to 0 is treated the same way (beta is pushed out to the cap along its ray),
    and ten steps without relative progress end the run unconverged.
    """
    beta = np.zeros(ds.d) if cfg.init is None else np.array(cfg.init, dtype=np.float64)
    total_w = float(np.sum(ds.w))
    f = nll(ds, beta)
    g = nll_grad(ds, beta)
    if not np.isfinite(f):
        raise FitError("non-finite loss at the initial point")
    hist: deque = deque(maxlen=cfg.memory)

    stalled = 0
    for it in range(cfg.max_iters):
        if f == 0.0:
            # every margin is far below zero: the loss stays 0 along the ray
            norm = np.linalg.norm(beta)
            if cfg.beta_norm_cap is not None and norm <= cfg.beta_norm_cap:
                beta = beta * (np.nextafter(cfg.beta_norm_cap, np.inf) / norm)
            return FitResult(ModelParams(beta), nll(ds, beta), it, False)
        if np.max(np.abs(g)) <= cfg.grad_tol * min(total_w, f):
            return FitResult(ModelParams(beta), f, it, True)
        if cfg.beta_norm_cap is not None and np.linalg.norm(beta) > cfg.beta_norm_cap:
            return FitResult(ModelParams(beta), f, it, False)

        direction = -_two_loop(g, hist)
        slope = g @ direction
        if not slope < 0:
            hist.clear()
            direction, slope = -g, -(g @ g)
        step = 1.0 if hist else 1.0 / max(1.0, np.linalg.norm(g))

        trial, f_new = _armijo(ds, beta, f, direction, slope, step, cfg.beta_norm_cap)
        if trial is None:
            return FitResult(ModelParams(beta), f, it, False)
        if not np.isfinite(f_new):
            raise FitError("non-finite loss encountered")

        stalled = stalled + 1 if f - f_new <= 1e-15 * f else 0
        if stalled >= 10:
            return FitResult(ModelParams(trial), f_new, it + 1, False)

        g_new = nll_grad(ds, trial)
        s, y = trial - beta, g_new - g
        if s @ y > 1e-10 * np.sqrt((s @ s) * (y @ y)):
            hist.append((s, y, 1.0 / (s @ y)))
        beta, f, g = trial, f_new, g_new

    return FitResult(ModelParams(beta), f, cfg.max_iters,
                     bool(np.max(np.abs(g)) <= cfg.grad_tol * min(total_w, f)))


def _armijo(ds, beta, f, direction, slope, step, cap=None):
    """Backtrack by halves until sufficient decrease; if the first step passes,
    keep doubling while it still passes and lowers the loss (separable data
    otherwise creeps towards the norm cap one unit step at a time). Doubling
    stops once the point leaves the ``cap`` ball."""
    f_new = nll(ds, beta + step * direction)
    if f_new <= f + 1e-4 * step * slope:
        for _ in range(60):
            if cap is not None and np.linalg.norm(beta + step * direction) > cap:
                break
            f_big = nll(ds, beta + 2 * step * direction)
            if not (f_big < f_new and f_big <= f + 2e-4 * step * slope):
                break
            step, f_new = 2 * step, f_big
        return beta + step * direction, f_new
    while step >= 1e-20:
        step *= 0.5
        f_new = nll(ds, beta + step * direction)
        if f_new <= f + 1e-4 * step * slope:
            return beta + step * direction, f_new
    return None, f


def _two_loop(g, hist):
    if not hist:
        return g.copy()
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(hist):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = hist[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(hist, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q
