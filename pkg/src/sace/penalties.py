"""Penalty functions, thresholding maps, and full objective evaluators.

All losses follow the un-normalized convention 0.5 * ||y - X beta||^2, which
is why the minimax concave penalty carries an explicit sample count `n`
inside its definition: its derivative vanishes beyond gamma*lambda/n.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import CoefficientVector, Dataset
from .errors import BadDError, BadGammaError, DimensionMismatchError


class PenaltyFamily(enum.Enum):
    L1 = "l1"
    MCP = "mcp"


@dataclass(frozen=True)
class PenaltySpec:
    """Hyperparameters of one penalized problem.

    `ridge_weight` multiplies ||beta||^2 in the objective written as
    (ridge_weight/2) * ||beta||^2: it is 1 for the smooth-adjustment
    estimators, 0 for plain lasso/MCP, and 2*lambda2 for the naive elastic
    net written with penalty lambda2 * ||beta||^2.
    """

    family: PenaltyFamily
    lam: float
    gamma: float | None = None
    d: float = 0.0
    ridge_weight: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not (0.0 <= self.d <= 1.0):
            raise BadDError(f"d={self.d} outside [0, 1]")
        if self.family is PenaltyFamily.MCP:
            if self.gamma is None or self.gamma <= 0:
                raise BadGammaError("MCP needs gamma > 0")


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0); the prox of t * |.|. Vectorized."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def mcp_value(t, lam, gamma, n):
    """Minimax concave penalty lam * integral_0^|t| (1 - n*x/(gamma*lam))+ dx.

    Closed form: lam*|t| - n*t^2/(2*gamma) while |t| <= gamma*lam/n, and the
    constant gamma*lam^2/(2*n) beyond. Vectorized in `t`; lam == 0 gives 0.
    """
    if gamma <= 0 or n < 1:
        raise BadGammaError("need gamma > 0 and n >= 1")
    t = np.abs(np.asarray(t, dtype=np.float64))
    if lam == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    knot = gamma * lam / n
    inner = lam * t - n * t * t / (2.0 * gamma)
    out = np.where(t <= knot, inner, gamma * lam * lam / (2.0 * n))
    return float(out) if out.ndim == 0 else out

def mcp_derivative(t, lam, gamma, n):
    """d/dt of `mcp_value` for t > 0: lam * (1 - n*|t|/(gamma*lam))+.

    Returns lam at t = 0 (the right derivative) and 0 for |t| >= gamma*lam/n.
    """
    if gamma <= 0 or n < 1:
        raise BadGammaError("need gamma > 0 and n >= 1")
    t = np.abs(np.asarray(t, dtype=np.float64))
    if lam == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    out = lam * np.maximum(1.0 - n * t / (gamma * lam), 0.0)
    return float(out) if out.ndim == 0 else out


def _check_dims(d: Dataset, beta: CoefficientVector, beta0: CoefficientVector):
    if beta.p != d.p or beta0.p != d.p:
        raise DimensionMismatchError("beta/beta0 length must equal d.p")


def sace_objective(d: Dataset, beta: CoefficientVector, spec: PenaltySpec,
                   beta0: CoefficientVector) -> float:
    """0.5*||y - X b||^2 + 0.5*||b||^2 + lam*||b||_1 - d * beta0' b."""
    _check_dims(d, beta, beta0)
    b = beta.values
    r = d.y - d.X @ b
    return float(0.5 * r @ r + 0.5 * b @ b + spec.lam * np.abs(b).sum()
                 - spec.d * (beta0.values @ b))


def gsace_objective(d: Dataset, beta: CoefficientVector, spec: PenaltySpec,
                    beta0: CoefficientVector) -> float:
    """0.5*||y - X b||^2 + 0.5*||b||^2 + sum_j mcp(b_j) - d * beta0' b."""
    _check_dims(d, beta, beta0)
    if spec.family is not PenaltyFamily.MCP:
        raise ValueError("spec.family must be MCP")
    b = beta.values
    r = d.y - d.X @ b
    pen = float(np.sum(mcp_value(b, spec.lam, spec.gamma, d.n)))
    return float(0.5 * r @ r + 0.5 * b @ b + pen - spec.d * (beta0.values @ b))


@dataclass(frozen=True)
class AdaptiveWeightVector:
    """Per-coordinate penalty levels lam - d * beta0_j * tau_j.

    Diagnostic output only: it involves the sign vector of a finished fit,
    so it can never be supplied to a solver in advance.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.isfinite(v).all():
            raise ValueError("adaptive weights must be finite")
        object.__setattr__(self, "values", v)


def adaptive_weights(spec: PenaltySpec, beta0: CoefficientVector,
                     tau) -> AdaptiveWeightVector:
    """Elementwise lam - d * beta0_j * tau_j with tau in {-1, 0, +1}^p."""
    tau = np.asarray(tau, dtype=np.float64).ravel()
    if tau.shape != beta0.values.shape:
        raise DimensionMismatchError("tau must align with beta0")
    if not np.all(np.isin(tau, (-1.0, 0.0, 1.0))):
        raise ValueError("tau entries must be -1, 0, or +1")
    return AdaptiveWeightVector(spec.lam - spec.d * beta0.values * tau)


# Objective helpers for the baseline fitters (same loss convention).

def lasso_objective(d: Dataset, beta: CoefficientVector, lam: float) -> float:
    b = beta.values
    r = d.y - d.X @ b
    return float(0.5 * r @ r + lam * np.abs(b).sum())


def elastic_net_objective(d: Dataset, beta: CoefficientVector,
                          lam1: float, lam2: float) -> float:
    b = beta.values
    r = d.y - d.X @ b
    return float(0.5 * r @ r + lam1 * np.abs(b).sum() + lam2 * (b @ b))


def mcp_objective(d: Dataset, beta: CoefficientVector, lam: float,
                  gamma: float) -> float:
    b = beta.values
    r = d.y - d.X @ b
    return float(0.5 * r @ r + np.sum(mcp_value(b, lam, gamma, d.n)))
