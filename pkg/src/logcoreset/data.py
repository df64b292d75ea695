"""Datasets for weighted logistic regression: parsing, label folding, statistics.

Labels are folded into the design matrix, so every row is ``x_i = -y_i * z_i``
and the loss of row ``i`` is ``softplus(x_i @ beta)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DataFormatError(ValueError):
    """Raised when an input file cannot be parsed into a binary dataset."""


def _check_finite(M, what):
    values = M.data if sp.issparse(M) else M
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{what} contains NaN or Inf entries")


@dataclass(frozen=True)
class LabeledData:
    """Raw features ``Z`` (n x d, dense or CSR) with labels ``Y`` in {-1, +1}."""

    Z: np.ndarray | sp.csr_matrix
    Y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        Z = sp.csr_matrix(self.Z, dtype=np.float64) if sp.issparse(self.Z) else np.atleast_2d(
            np.asarray(self.Z, dtype=np.float64)
        )
        Y = np.asarray(self.Y, dtype=np.float64).ravel()
        if Z.shape[0] < 1 or Z.shape[1] < 1:
            raise ValueError("LabeledData needs n >= 1 and d >= 1")
        if Y.shape[0] != Z.shape[0]:
            raise ValueError(f"{Z.shape[0]} feature rows but {Y.shape[0]} labels")
        if not np.all((Y == 1.0) | (Y == -1.0)):
            raise ValueError("labels must be exactly -1 or +1")
        _check_finite(Z, "Z")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Folded design matrix ``X`` with strictly positive row weights ``w``.

    ``X`` is either a dense C-ordered array or a CSR matrix. Instances are
    treated as immutable.
    """

    X: np.ndarray | sp.csr_matrix
    w: np.ndarray
    has_intercept: bool = False

    def __post_init__(self):
        if sp.issparse(self.X):
            X = sp.csr_matrix(self.X, dtype=np.float64)
            X.eliminate_zeros()
        else:
            X = np.ascontiguousarray(np.atleast_2d(np.asarray(self.X, dtype=np.float64)))
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if X.shape[0] != w.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but w has {w.shape[0]} entries")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and strictly positive")
        _check_finite(X, "X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    def dense_weighted(self) -> np.ndarray:
        """Return ``D_w X`` as a dense array."""
        if self.is_sparse:
            return np.asarray(sp.diags(self.w) @ self.X.toarray())
        return self.w[:, None] * self.X

    def take(self, indices, weights) -> "Dataset":
        """Rows at ``indices`` (repeats allowed) carrying new ``weights``."""
        return Dataset(self.X[np.asarray(indices)], weights, self.has_intercept)


@dataclass(frozen=True)
class DatasetStats:
    n: int
    d: int
    nnz: int
    total_weight: float
    w_min: float
    w_max: float
    omega: float


def fold_labels(data: LabeledData, add_intercept: bool = False) -> Dataset:
    """Fold labels into rows, ``x_i = -y_i z_i``, with unit weights.

    With ``add_intercept`` a constant-one column is appended to ``Z`` first, so
    the folded column holds ``-y_i``.
    """
    Z = data.Z
    if add_intercept:
        ones = np.ones((data.n, 1))
        Z = sp.hstack([Z, sp.csr_matrix(ones)], format="csr") if sp.issparse(Z) else np.hstack([Z, ones])
    if sp.issparse(Z):
        X = sp.diags(-data.Y) @ Z
    else:
        X = -data.Y[:, None] * Z
    return Dataset(X, np.ones(data.n), has_intercept=add_intercept)


def unfold_labels(ds: Dataset, Y) -> np.ndarray | sp.csr_matrix:
    """Invert :func:`fold_labels` for known labels (drops the intercept column)."""
    Y = np.asarray(Y, dtype=np.float64)
    Z = sp.diags(-Y) @ ds.X if ds.is_sparse else -Y[:, None] * ds.X
    return Z[:, : ds.d - 1] if ds.has_intercept else Z


def dataset_stats(ds: Dataset) -> DatasetStats:
    nnz = int(np.count_nonzero(ds.X.data)) if ds.is_sparse else int(np.count_nonzero(ds.X))
    w_min, w_max = float(ds.w.min()), float(ds.w.max())
    return DatasetStats(
        n=ds.n,
        d=ds.d,
        nnz=nnz,
        total_weight=float(np.sum(ds.w)),
        w_min=w_min,
        w_max=w_max,
        omega=w_max / w_min,
    )


def standardize(data: LabeledData) -> LabeledData:
    """Center and scale each feature column to unit variance (constant columns left as is)."""
    Z = data.Z.toarray() if sp.issparse(data.Z) else data.Z
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    std[std == 0] = 1.0
    return LabeledData((Z - mean) / std, data.Y, dict(data.meta))


# ---------------------------------------------------------------------------
# Parsing


def _map_labels(raw: np.ndarray) -> np.ndarray:
    classes = set(np.unique(raw).tolist())
    if len(classes) > 2:
        raise DataFormatError(f"more than two classes: {sorted(classes)}")
    if classes <= {-1.0, 1.0}:
        return raw
    if classes <= {0.0, 1.0}:
        return np.where(raw == 0.0, -1.0, 1.0)
    raise DataFormatError(f"unsupported label encoding {sorted(classes)}; use {{-1,+1}} or {{0,1}}")


def _parse_float(token, line_no):
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"line {line_no}: cannot parse {token!r} as a number") from None
    if not math.isfinite(value):
        raise DataFormatError(f"line {line_no}: non-finite value {token!r}")
    return value


def _load_libsvm(path, n_features):
    labels, rows, cols, vals = [], [], [], []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            row = len(labels)
            labels.append(_parse_float(parts[0], line_no))
            for item in parts[1:]:
                idx, sep, val = item.partition(":")
                if not sep:
                    raise DataFormatError(f"line {line_no}: expected index:value, got {item!r}")
                try:
                    j = int(idx)
                except ValueError:
                    raise DataFormatError(f"line {line_no}: bad feature index {idx!r}") from None
                if j < 1:
                    raise DataFormatError(f"line {line_no}: feature indices are 1-based, got {j}")
                rows.append(row)
                cols.append(j - 1)
                vals.append(_parse_float(val, line_no))
    if not labels:
        raise DataFormatError(f"{path}: empty file")
    d = max(cols, default=-1) + 1
    if n_features is not None:
        if d > n_features:
            raise DataFormatError(f"feature index {d} exceeds n_features={n_features}")
        d = n_features
    Z = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), max(d, 1)))
    return Z, np.array(labels)


def _load_csv(path, label_column):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for line_no, rec in enumerate(csv.reader(fh), 1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise DataFormatError(f"line {line_no}: expected {width} columns, got {len(rec)}")
            rows.append([_parse_float(c, line_no) for c in rec])
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    if width < 2:
        raise DataFormatError("csv needs at least one feature column and one label column")
    A = np.array(rows)
    col = width - 1 if label_column is None else label_column
    if not -width <= col < width:
        raise DataFormatError(f"label column {col} out of range for {width} columns")
    col %= width
    return np.delete(A, col, axis=1), A[:, col]


def load_dataset(path, format: str = "libsvm", label_column: int | None = None,
                 n_features: int | None = None) -> LabeledData:
    """Read a binary classification file.

    ``format`` is ``"libsvm"`` (1-based sparse indices, returns CSR features)
    or ``"csv"`` (headerless, dense; label in ``label_column``, default last).
    Labels in {0, 1} are mapped to {-1, +1}.
    """
    path = Path(path)
    if format == "libsvm":
        Z, raw = _load_libsvm(path, n_features)
    elif format == "csv":
        Z, raw = _load_csv(path, label_column)
    else:
        raise ValueError(f"unknown format {format!r}")
    return LabeledData(Z, _map_labels(raw))


def save_labeled(data: LabeledData, path, format: str = "csv") -> None:
    """Write ``data`` as libsvm or as csv with the label in the last column."""
    Z = data.Z.tocsr() if sp.issparse(data.Z) else data.Z
    with open(path, "w", newline="") as fh:
        if format == "csv":
            dense = Z.toarray() if sp.issparse(Z) else Z
            for z, y in zip(dense, data.Y):
                fh.write(",".join(repr(float(v)) for v in z) + f",{int(y)}\n")
        elif format == "libsvm":
            Zs = sp.csr_matrix(Z)
            for i, y in enumerate(data.Y):
                lo, hi = Zs.indptr[i], Zs.indptr[i + 1]
                feats = " ".join(
                    f"{j + 1}:{float(v)!r}" for j, v in zip(Zs.indices[lo:hi], Zs.data[lo:hi]) if v != 0
                )
                fh.write(f"{int(y):+d} {feats}".rstrip() + "\n")
        else:
            raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# Coreset CSV: index,u_weight,x_1,...,x_d


def write_coreset_csv(path, indices, weights, points) -> None:
    points = points.toarray() if sp.issparse(points) else np.asarray(points)
    d = points.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["index", "u_weight"] + [f"x_{j + 1}" for j in range(d)]) + "\n")
        for idx, u, row in zip(indices, weights, points):
            fh.write(",".join([str(int(idx)), f"{u:.17g}"] + [f"{v:.17g}" for v in row]) + "\n")


def read_coreset_csv(path):
    """Return ``(indices, weights, points)`` from a coreset CSV file."""
    A = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return A[:, 0].astype(np.int64), A[:, 1].copy(), np.ascontiguousarray(A[:, 2:])


def write_dataset_csv(path, ds: Dataset) -> None:
    write_coreset_csv(path, np.arange(ds.n), ds.w, ds.X)


def read_dataset_csv(path, has_intercept: bool = False) -> Dataset:
    _, w, X = read_coreset_csv(path)
    return Dataset(X, w, has_intercept)
