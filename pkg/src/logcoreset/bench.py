"""Benchmark harness: relative full-data loss of coreset-trained models.

For every method, size ``k`` and repetition, a coreset is built, a weighted
MLE ``beta~`` is fit on it, and the error is
``|L(beta*) - L(beta~)| / L(beta*)`` with both losses on the full data.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .coreset import build_base, build_uniform
from .data import Dataset
from .logreg import FitConfig, FitError, fit_mle, nll

METHODS = ("uniform", "qr", "qr_sketch")
CSV_FIELDS = ("method", "k", "rep", "rel_error", "build_ms", "fit_ms")


def default_sizes(n: int, count: int = 30) -> list[int]:
    """``count`` geometrically spaced sizes between ``floor(2 sqrt n)`` and ``ceil(n / 16)``."""
    lo, hi = math.floor(2 * math.sqrt(n)), math.ceil(n / 16)
    lo, hi = max(1, min(lo, n)), max(1, min(hi, n))
    if hi <= lo:
        return [lo]
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, count)})


def worker_threads() -> int:
    try:
        return max(1, int(os.environ.get("LOGCORESET_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[str, ...] = METHODS
    sizes: tuple[int, ...] | None = None
    reps: int = 20
    seed: int = 0
    fit: FitConfig = field(default_factory=lambda: FitConfig(beta_norm_cap=1e4))
    threads: int | None = None

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.sizes is not None and (not self.sizes or min(self.sizes) < 1):
            raise ValueError("sizes must be a nonempty list of positive integers")


@dataclass
class BenchReport:
    baseline: dict
    cells: list[dict]
    runs: list[dict]

    def to_json(self) -> dict:
        return {"baseline": self.baseline, "cells": self.cells}

    def cell(self, method: str, k: int) -> dict:
        return next(c for c in self.cells if c["method"] == method and c["k"] == k)

    def write(self, prefix) -> None:
        with open(f"{prefix}.json", "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, default=_json_default)
        with open(f"{prefix}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(self.runs)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _build(ds, method, k, seed):
    if method == "uniform":
        return build_uniform(ds, k, seed)
    return build_base(ds, k, "exact_qr" if method == "qr" else "sketched", None, seed)


def run_once(ds: Dataset, method: str, k: int, seed: int, fit: FitConfig, loss_opt: float) -> dict:
    t0 = time.perf_counter()
    cs = _build(ds, method, k, seed)
    t1 = time.perf_counter()
    res = fit_mle(cs.as_dataset(ds.has_intercept), fit)
    t2 = time.perf_counter()
    loss = nll(ds, res.params.beta)
    total_ms = 1e3 * (time.perf_counter() - t0)
    return {
        "rel_error": abs(loss_opt - loss) / loss_opt,
        "build_ms": 1e3 * (t1 - t0),
        "fit_ms": 1e3 * (t2 - t1),
        "total_ms": total_ms,
        "converged": res.converged,
        "beta_norm": float(np.linalg.norm(res.params.beta)),
    }


def run_bench(ds: Dataset, cfg: BenchConfig = BenchConfig()) -> BenchReport:
    """Full-data fit once, then every (method, k, rep) cell. Failing reps are recorded, not fatal."""
    t0 = time.perf_counter()
    full = fit_mle(ds, FitConfig(grad_tol=cfg.fit.grad_tol, max_iters=cfg.fit.max_iters))
    time_opt = time.perf_counter() - t0
    loss_opt = full.nll
    baseline = {"nll_opt": loss_opt, "time_opt": time_opt, "converged": full.converged, "n": ds.n, "d": ds.d}

    sizes = list(cfg.sizes) if cfg.sizes is not None else default_sizes(ds.n)
    if max(sizes) > ds.n:
        raise ValueError(f"sizes must not exceed n={ds.n}")
    jobs = [(m, k, r) for m in cfg.methods for k in sizes for r in range(cfg.reps)]

    def job(spec):
        method, k, rep = spec
        seed = _rng.derive_seed(cfg.seed, METHODS.index(method), k, rep)
        row = {"method": method, "k": k, "rep": rep, "seed": seed}
        try:
            row.update(run_once(ds, method, k, seed, cfg.fit, loss_opt))
            row["failed"] = False
        except (FitError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            row.update(rel_error=math.nan, build_ms=math.nan, fit_ms=math.nan, failed=True, error=str(exc))
        return row

    threads = cfg.threads or worker_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(job, jobs))
    else:
        runs = [job(j) for j in jobs]

    cells = []
    for method in cfg.methods:
        for k in sizes:
            rows = [r for r in runs if r["method"] == method and r["k"] == k]
            ok = [r for r in rows if not r["failed"]]
            err = np.array([r["rel_error"] for r in ok])
            build = np.array([r["build_ms"] for r in ok])
            fit = np.array([r["fit_ms"] for r in ok])
            cells.append({
                "method": method,
                "k": k,
                "reps": len(rows),
                "failed": len(rows) - len(ok),
                "rel_error_mean": _stat(np.mean, err),
                "rel_error_std": _stat(np.std, err),
                "rel_error_median": _stat(np.median, err),
                "build_ms_mean": _stat(np.mean, build),
                "build_ms_std": _stat(np.std, build),
                "fit_ms_mean": _stat(np.mean, fit),
                "fit_ms_std": _stat(np.std, fit),
            })
    return BenchReport(baseline, cells, runs)


def _stat(fn, a):
    return float(fn(a)) if a.size else None
