"""Regression data model: datasets, standardization, residuals, supports.

Conventions used throughout the package: the response is centered at zero,
each predictor column is centered and scaled so that (1/n) * ||X_j||^2 = 1,
and coefficient supports are zero-based index sets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumnError,
    DimensionMismatchError,
    NonFiniteError,
    ParseError,
)

# Variance below this (relative to the column's mean square) counts as constant.
_CONSTANT_VAR_REL = 1e-20


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-d, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class Dataset:
    """Immutable (X, y) pair with validated shapes.

    Parameters
    ----------
    X : ndarray of shape (n, p)
        Predictor matrix, stored column-major and marked read-only.
    y : ndarray of shape (n,)
        Response vector, marked read-only.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asfortranarray(_as_matrix(self.X))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64).ravel())
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatchError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 2:
            raise DimensionMismatchError("need at least 2 observations")
        if X.shape[1] < 1:
            raise DimensionMismatchError("need at least 1 predictor")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise NonFiniteError("X and y must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_norms_sq(self):
        """Per-column squared norms ||X_j||^2 as a fresh array."""
        return np.einsum("ij,ij->j", self.X, self.X)


@dataclass(frozen=True)
class CoefficientVector:
    """Dense coefficient vector whose support is recomputed on access."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if not np.isfinite(v).all():
            raise NonFiniteError("coefficients must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def support(self):
        """Zero-based indices of nonzero entries, always recomputed."""
        return tuple(np.flatnonzero(self.values != 0.0))

    @classmethod
    def zeros(cls, p):
        return cls(np.zeros(p))


@dataclass(frozen=True)
class SupportSet:
    """Ordered set of active coordinate indices."""

    indices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        idx = tuple(int(j) for j in self.indices)
        if any(j < 0 for j in idx):
            raise ValueError("support indices must be nonnegative")
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    @property
    def q(self) -> int:
        return len(self.indices)

    def as_array(self):
        return np.asarray(self.indices, dtype=np.intp)

    def __contains__(self, j):
        return j in self.indices

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class StandardizationRecord:
    """Centering and scaling parameters needed to invert `standardize`."""

    y_mean: float
    column_means: np.ndarray
    column_scales: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.column_means, dtype=np.float64).ravel()
        scales = np.asarray(self.column_scales, dtype=np.float64).ravel()
        if means.shape != scales.shape:
            raise DimensionMismatchError("means and scales must align")
        if np.any(scales <= 0):
            raise ValueError("all column scales must be strictly positive")
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_scales", scales)


def standardize(raw: Dataset):
    """Center y, then center and scale every column of X.

    Scales are sqrt((1/n) * sum((x - xbar)^2)) so the standardized design
    satisfies (1/n) * X_j' X_j = 1 exactly.

    Returns
    -------
    (Dataset, StandardizationRecord)

    Raises
    ------
    ConstantColumnError
        If some column has zero variance.
    """
    X, y = raw.X, raw.y
    n = raw.n
    means = X.mean(axis=0)
    centered = X - means
    var = np.einsum("ij,ij->j", centered, centered) / n
    meansq = np.einsum("ij,ij->j", X, X) / n
    bad = np.flatnonzero(var <= _CONSTANT_VAR_REL * np.maximum(1.0, meansq))
    if bad.size:
        raise ConstantColumnError(int(bad[0]))
    scales = np.sqrt(var)
    y_mean = float(y.mean())
    out = Dataset(centered / scales, y - y_mean)
    record = StandardizationRecord(y_mean=y_mean, column_means=means,
                                   column_scales=scales)
    return out, record


def residual(d: Dataset, beta: CoefficientVector):
    """Residual vector y - X beta."""
    if beta.p != d.p:
        raise DimensionMismatchError(
            f"beta has {beta.p} entries for {d.p} predictors")
    return d.y - d.X @ beta.values


def extract_support(beta: CoefficientVector, tol: float = 0.0) -> SupportSet:
    """Indices with |beta_j| strictly above `tol`."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return SupportSet(tuple(np.flatnonzero(np.abs(beta.values) > tol)))


def destandardize_coefficients(record: StandardizationRecord,
                               beta: CoefficientVector):
    """Map standardized-scale coefficients back to the raw data scale.

    Returns
    -------
    (CoefficientVector, float)
        Raw-scale coefficients and the implied intercept, so that
        ``intercept + X_raw @ coefs`` reproduces predictions made in
        standardized coordinates.
    """
    raw = beta.values / record.column_scales
    intercept = record.y_mean - float(raw @ record.column_means)
    return CoefficientVector(raw), intercept


def standardize_coefficients(record: StandardizationRecord,
                             beta_raw: CoefficientVector) -> CoefficientVector:
    """Inverse of `destandardize_coefficients` on the slope part."""
    return CoefficientVector(beta_raw.values * record.column_scales)


def predict(record: StandardizationRecord, beta: CoefficientVector, X_raw):
    """Predict raw-scale responses from a standardized-scale fit."""
    X_raw = _as_matrix(X_raw)
    Z = (X_raw - record.column_means) / record.column_scales
    return Z @ beta.values + record.y_mean


def load_dataset_csv(path) -> Dataset:
    """Load (y, X) from CSV: header row, response first, predictors after.

    UTF-8, '.' decimal separator. Raises ParseError with a line number on
    malformed rows.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ParseError(1, "need a header row with response + predictors")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(lineno, f"expected {width} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
    if not rows:
        raise ParseError(2, "no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(arr[:, 1:], arr[:, 0])
