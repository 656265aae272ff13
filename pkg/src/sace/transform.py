"""Artificial-data reduction of the SACE problem to a plain lasso.

The reduction stacks X over a scaled identity and folds the reversed
adaptive term into the response through a pseudo-inverse of the initial
support's design block. The stated rescaling between the transformed
minimizer and the direct estimate is ambiguous, so this module is a
validation path: `equivalence_report` calibrates the (scale, lambda)
convention empirically against the direct solver and reports the residual
gap. It is never used inside tuning loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CoefficientVector, Dataset, SupportSet
from .errors import BadDError
from .solvers import FitResult, InitialEstimate, fit_lasso, fit_sace

_SQRT2 = np.sqrt(2.0)

# Candidate conventions searched by equivalence_report, in tie-break order.
_SCALES = (1.0, 1.0 / _SQRT2, _SQRT2)
_LAMBDA_MULTIPLIERS = (1.0, _SQRT2, 1.0 / _SQRT2)


def pseudo_inverse_transpose(X_sub, return_rank: bool = False):
    """Moore-Penrose pseudo-inverse of X_sub', returned as an n-by-q matrix.

    Computed by SVD with singular values below 1e-10 * sigma_max truncated,
    so collinear columns degrade gracefully instead of failing the displayed
    inverse formula X_sub (X_sub' X_sub)^-1.
    """
    X_sub = np.atleast_2d(np.asarray(X_sub, dtype=np.float64))
    U, s, Vt = np.linalg.svd(X_sub, full_matrices=False)
    cutoff = 1e-10 * (s[0] if s.size else 0.0)
    keep = s > cutoff
    rank = int(keep.sum())
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    # pinv(X') = (pinv(X))' = U diag(1/s) V'  ->  shape n x q
    result = (U * inv_s) @ Vt
    if return_rank:
        return result, rank
    return result


@dataclass(frozen=True)
class ArtificialProblem:
    """Stacked design (n+p) x p, folded response, and the folding matrix B."""

    X_star: np.ndarray
    y_star: np.ndarray
    B: np.ndarray
    support0: SupportSet


def build_artificial(d: Dataset, init: InitialEstimate,
                     dparam: float) -> ArtificialProblem:
    """Assemble X* = (X; I)/sqrt(2) and y* = (y + d*B*beta0; 0)."""
    if not (0.0 <= dparam <= 1.0):
        raise BadDError(f"d={dparam} outside [0, 1]")
    n, p = d.n, d.p
    X_star = np.vstack([d.X, np.eye(p)]) / _SQRT2
    B = np.zeros((n, p))
    xi0 = init.support0
    if xi0.q:
        idx = xi0.as_array()
        B[:, idx] = pseudo_inverse_transpose(d.X[:, idx])
    y_star = np.concatenate([d.y + dparam * (B @ init.beta0.values),
                             np.zeros(p)])
    return ArtificialProblem(X_star=X_star, y_star=y_star, B=B, support0=xi0)


def solve_via_transform(ap: ArtificialProblem, lam: float,
                        scale: float = 1.0 / _SQRT2,
                        lambda_multiplier: float = 1.0 / _SQRT2,
                        **fit_kwargs) -> CoefficientVector:
    """Lasso on the artificial data, mapped back by the given convention.

    Defaults to the convention calibrated for the d = 0 case: solve at
    lam/sqrt(2) and shrink the minimizer by 1/sqrt(2).
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    stacked = Dataset(ap.X_star, ap.y_star)
    fit = fit_lasso(stacked, lam * lambda_multiplier, **fit_kwargs)
    return CoefficientVector(scale * fit.beta.values)


@dataclass(frozen=True)
class EquivalenceReport:
    """Best agreement between the transform path and the direct solver."""

    max_gap: float
    calibrated_scale: float
    calibrated_lambda: float
    direct: FitResult


def equivalence_report(d: Dataset, init: InitialEstimate, dparam: float,
                       lam: float, **fit_kwargs) -> EquivalenceReport:
    """Search scale x lambda-multiplier conventions for the smallest
    l-infinity gap between the two solution paths."""
    direct = fit_sace(d, lam, dparam, init=init, **fit_kwargs)
    ap = build_artificial(d, init, dparam)
    stacked = Dataset(ap.X_star, ap.y_star)
    best = None
    for mult in _LAMBDA_MULTIPLIERS:
        fit = fit_lasso(stacked, lam * mult, **fit_kwargs)
        for scale in _SCALES:
            gap = float(np.max(np.abs(scale * fit.beta.values
                                      - direct.beta.values)))
            if best is None or gap < best[0]:
                best = (gap, scale, lam * mult)
    return EquivalenceReport(max_gap=best[0], calibrated_scale=best[1],
                             calibrated_lambda=best[2], direct=direct)
