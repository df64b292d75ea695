"""Bounds on the complexity ``mu_w(X) = sup_beta ||(D_w X beta)^+||_1 / ||(D_w X beta)^-||_1``.

Two routes:

* :func:`mu_lp` minimizes the negative mass ``||(U beta)^-||_1`` of an
  orthonormal basis ``U`` of ``D_w X`` by linear programming and turns the
  optimum ``t`` into a certified bracket.
* :func:`mu_bruteforce` evaluates the ratio over a grid of directions, which
  certifies only a lower bound (exact for d = 1).

A small value means the two classes overlap and are balanced; separable data
has ``mu = inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.stats import qmc, norm

from .data import Dataset
from .scores import orthonormal_basis

SEPARABLE_TOL = 1e-10


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class MuEstimate:
    t: float
    mu_lower: float
    mu_upper: float
    method: str
    basis_kind: str | None = None
    beta: np.ndarray | None = None
    solution: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(x):
            return "inf" if math.isinf(x) else float(x)

        return {
            "t": enc(self.t),
            "mu_lower": enc(self.mu_lower),
            "mu_upper": enc(self.mu_upper),
            "method": self.method,
            "basis_kind": self.basis_kind,
        }


@dataclass(frozen=True)
class LpProblem:
    """``min c @ x`` s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, with per-variable bounds.

    Variables are stacked as ``[a (n), b (n), c (r), dbar (r), beta (r)]``.
    """

    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    bounds: list
    n: int
    r: int

    def split(self, x):
        n, r = self.n, self.r
        return {
            "a": x[:n],
            "b": x[n:2 * n],
            "c": x[2 * n:2 * n + r],
            "dbar": x[2 * n + r:2 * n + 2 * r],
            "beta": x[2 * n + 2 * r:],
        }


def build_lp(U: np.ndarray, face: tuple[int, float]) -> LpProblem:
    """Negative-mass LP on the face ``beta_j = sign`` of the unit max-norm sphere.

    Constraints: ``U beta = a - b``, ``beta = c - dbar``, ``sum(c + dbar) >= 1``
    and ``beta_j = sign``. Without the face constraint the program is solved
    by ``c = dbar``, ``beta = 0``; the faces restore a nonzero ``beta``.
    """
    n, r = U.shape
    j, sign = face
    I_n, I_r = sp.identity(n, format="csr"), sp.identity(r, format="csr")
    Z_rn = sp.csr_matrix((r, n))
    e_j = sp.csr_matrix(([1.0], ([0], [j])), shape=(1, r))
    A_eq = sp.vstack([
        sp.hstack([-I_n, I_n, sp.csr_matrix((n, 2 * r)), sp.csr_matrix(U)]),
        sp.hstack([Z_rn, Z_rn, -I_r, I_r, I_r]),
        sp.hstack([sp.csr_matrix((1, 2 * n + 2 * r)), e_j]),
    ], format="csr")
    b_eq = np.concatenate([np.zeros(n + r), [sign]])
    A_ub = sp.hstack([sp.csr_matrix((1, 2 * n)), -np.ones((1, 2 * r)), sp.csr_matrix((1, r))], format="csr")
    c = np.concatenate([np.zeros(n), np.ones(n), np.zeros(3 * r)])
    bounds = [(0, None)] * (2 * n + 2 * r) + [(None, None)] * r
    return LpProblem(c, A_eq, b_eq, A_ub, np.array([-1.0]), bounds, n, r)


def _pos_neg(V):
    return np.sum(np.maximum(V, 0.0), axis=0), np.sum(np.maximum(-V, 0.0), axis=0)


def _ratio(p, q):
    if q > 0:
        return p / q
    return math.inf if p > 0 else math.nan


def mu_lp(ds: Dataset) -> MuEstimate:
    """Certified bracket on ``mu`` from ``2 r`` small LPs (``r``: rank of ``D_w X``).

    With ``t`` the least negative mass of ``U beta`` over ``||beta||_inf = 1``
    and minimizer ``beta*``:

    * lower bound: ``max(rho, 1/rho)`` for the ratio ``rho`` at ``beta*``
      (any direction and its negation bound a supremum from below);
    * upper bound: ``C / t - 1`` where ``C = min(sqrt(n d), sum_j ||U e_j||_1)``
      bounds ``||U beta||_1`` on the unit max-norm ball.
    """
    A = ds.dense_weighted()
    if not np.any(A):
        raise ValueError("degenerate dataset: all rows are zero")
    U = orthonormal_basis(A)
    n, r = U.shape
    best, best_sol = math.inf, None
    for j in range(r):
        for sign in (1.0, -1.0):
            lp = build_lp(U, (j, sign))
            res = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                          bounds=lp.bounds, method="highs",
                          options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
            if res.status != 0:
                raise LPError(f"LP solver failed on face ({j}, {sign:+.0f}): {res.message}")
            if res.fun < best:
                best, best_sol = res.fun, lp.split(res.x)
    t = max(float(best), 0.0)
    beta = best_sol["beta"]
    if t <= SEPARABLE_TOL:
        return MuEstimate(0.0, math.inf, math.inf, "lp", "qr_orthonormal", beta, best_sol)
    p, q = _pos_neg((U @ beta)[:, None])
    rho = _ratio(float(p[0]), float(q[0]))
    lower = max(rho, 1.0 / rho)
    col_l1 = float(np.sum(np.abs(U)))
    upper = max(min(math.sqrt(n * ds.d), col_l1) / t - 1.0, lower)
    return MuEstimate(t, lower, upper, "lp", "qr_orthonormal", beta, best_sol)


def direction_grid(d: int, size: int | None = None) -> np.ndarray:
    """Unit directions (d x m): exact for d = 1, angles for d = 2, low-discrepancy points for d = 3, 4."""
    if d == 1:
        return np.array([[1.0, -1.0]])
    if d == 2:
        m = size or 10_000
        theta = 2 * np.pi * np.arange(m) / m
        return np.vstack([np.cos(theta), np.sin(theta)])
    if d == 3:
        m = size or 100_000
        i = np.arange(m) + 0.5
        z = 1 - 2 * i / m
        phi = np.pi * (1 + 5**0.5) * i
        rad = np.sqrt(1 - z * z)
        return np.vstack([rad * np.cos(phi), rad * np.sin(phi), z])
    if d == 4:
        m = size or 100_000
        pts = qmc.Sobol(d=4, scramble=True, seed=0).random(1 << math.ceil(math.log2(m)))[:m]
        G = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12)).T
        return G / np.linalg.norm(G, axis=0)
    raise ValueError("grid search supports d <= 4")


def mu_bruteforce(ds: Dataset, grid: int | np.ndarray | None = None, chunk: int = 2048) -> MuEstimate:
    """Largest ratio over a direction grid; a lower bound on ``mu`` (upper bound reported as inf).

    ``grid`` is either a grid size or an explicit d x m array of directions.
    Each direction is scored together with its negation.
    """
    A = ds.dense_weighted()
    B = grid if isinstance(grid, np.ndarray) else direction_grid(ds.d, grid)
    best, best_beta = 0.0, None
    for lo in range(0, B.shape[1], chunk):
        Bc = B[:, lo:lo + chunk]
        p, q = _pos_neg(A @ Bc)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(q > 0, p / q, np.where(p > 0, np.inf, np.nan))
            r = np.fmax(r, np.where(p > 0, q / p, np.where(q > 0, np.inf, np.nan)))
        if np.all(np.isnan(r)):
            continue
        i = int(np.nanargmax(r))
        if r[i] > best:
            best, best_beta = float(r[i]), Bc[:, i]
    return MuEstimate(math.nan, best, math.inf, "bruteforce", None, best_beta)


def mu_exact_1d(ds: Dataset) -> float:
    """Exact ``mu`` for one-column data (the two sign cases of beta)."""
    if ds.d != 1:
        raise ValueError("exact evaluation needs d == 1")
    v = ds.w * np.asarray(ds.X.todense() if ds.is_sparse else ds.X).ravel()
    p, q = float(np.sum(v[v > 0])), float(-np.sum(v[v < 0]))
    return max(_ratio(p, q), _ratio(q, p))
