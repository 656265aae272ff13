"""Reference estimators and desk-scale checks backing the theory claims.

Contains the OLS-on-support and Liu-type oracle estimators, the l2 error
bound and its theoretical penalty level, a Monte Carlo probe of the
restricted-eigenvalue constant, and the classifier for the sign-match /
oracle-match event.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .data import CoefficientVector, Dataset, SupportSet
from .errors import BadDError, RankDeficientError
from .rng import STREAM_PROBE, rng_for
from .solvers import FitResult


@dataclass(frozen=True)
class OracleEstimates:
    """OLS and Liu estimators restricted to a support, plus the smallest
    eigenvalue of (1/n) X_S' X_S used by the oracle-match theorem."""

    beta_ols: CoefficientVector
    beta_liu: CoefficientVector
    lambda_min_S: float
    d: float


class Theorem3Event(enum.Enum):
    SIGN_MATCH = "sign_match"
    ORACLE_MATCH = "oracle_match"
    NEITHER = "neither"


def ols_on_support(d: Dataset, S: SupportSet) -> CoefficientVector:
    """Least squares on the columns in S, zeros elsewhere.

    Requires |S| <= n and X_S of full column rank.
    """
    beta = np.zeros(d.p)
    if S.q == 0:
        return CoefficientVector(beta)
    if S.q > d.n:
        raise RankDeficientError(S.indices)
    idx = S.as_array()
    Xs = d.X[:, idx]
    if np.linalg.matrix_rank(Xs) < S.q:
        raise RankDeficientError(S.indices)
    beta[idx] = np.linalg.solve(Xs.T @ Xs, Xs.T @ d.y)
    return CoefficientVector(beta)


def liu_oracle(d: Dataset, S: SupportSet, dparam: float) -> OracleEstimates:
    """(X_S'X_S + I)^-1 (X_S'X_S + d I) applied to the OLS-on-support fit.

    d = 1 reproduces OLS exactly; d = 0 is the unit-ridge estimator.
    """
    if not (0.0 <= dparam <= 1.0):
        raise BadDError(f"d={dparam} outside [0, 1]")
    beta_ols = ols_on_support(d, S)
    beta = np.zeros(d.p)
    lam_min = float("inf")
    if S.q:
        idx = S.as_array()
        Xs = d.X[:, idx]
        G = Xs.T @ Xs
        lam_min = float(np.linalg.eigvalsh(G / d.n)[0])
        beta[idx] = np.linalg.solve(G + np.eye(S.q),
                                    (G + dparam * np.eye(S.q)) @ beta_ols.values[idx])
    return OracleEstimates(beta_ols=beta_ols, beta_liu=CoefficientVector(beta),
                           lambda_min_S=lam_min, d=dparam)


def theorem3_event(fit: FitResult, beta_true: CoefficientVector,
                   oracle: OracleEstimates, tol: float = 1e-4) -> Theorem3Event:
    """Classify a fit as sign-matching the truth, matching the Liu oracle
    within tol (sup norm), or neither. Sign match takes precedence."""
    if np.array_equal(np.sign(fit.beta.values), np.sign(beta_true.values)):
        return Theorem3Event.SIGN_MATCH
    if np.max(np.abs(fit.beta.values - oracle.beta_liu.values)) <= tol:
        return Theorem3Event.ORACLE_MATCH
    return Theorem3Event.NEITHER


def l2_bound(q: int, p: int, n: int, K: float) -> float:
    """K * sqrt(q * log(p) / n)."""
    if p < 2 or n < 1 or q < 0:
        raise ValueError("need p >= 2, n >= 1, q >= 0")
    return K * math.sqrt(q * math.log(p) / n)


def theoretical_lambda(n: int, p: int, sigma: float) -> float:
    """Penalty level 4 * sigma * sqrt(n * log p) from the error-bound rate."""
    if n < 1 or p < 2 or sigma < 0:
        raise ValueError("need n >= 1, p >= 2, sigma >= 0")
    return 4.0 * sigma * math.sqrt(n * math.log(p))


@dataclass(frozen=True)
class BoundCheck:
    """Monte Carlo restricted-eigenvalue probe paired with the l2 bound.

    kappa_estimate is a minimum over sampled cone vectors, hence an upper
    bound on the certified constant; this is a heuristic, not a certificate.
    `holds` records whether the probe stayed strictly positive.
    """

    kappa_estimate: float
    bound_value: float
    K: float
    holds: bool


def re_probe(d: Dataset, O: SupportSet, samples: int, seed,
             K: float = 10.0) -> BoundCheck:
    """Sample vectors from the cone ||v_Oc||_1 <= 7 ||v_O||_1 and minimize
    the Rayleigh quotient of C = (1/n) X'X over them.

    Deterministic probes (single coordinates in O and their pairwise
    differences) are included so duplicated columns are caught without
    sampling luck.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if O.q == 0:
        raise ValueError("the cone needs a nonempty coordinate set")
    C = (d.X.T @ d.X) / d.n
    idx = O.as_array()
    mask = np.zeros(d.p, dtype=bool)
    mask[idx] = True

    def quotient(v):
        nv = v @ v
        return float(v @ (C @ v) / nv) if nv > 0 else float("inf")

    best = float("inf")
    for j in idx:
        e = np.zeros(d.p)
        e[j] = 1.0
        best = min(best, quotient(e))
    for a in range(O.q):
        for b in range(a + 1, O.q):
            e = np.zeros(d.p)
            e[idx[a]], e[idx[b]] = 1.0, -1.0
            best = min(best, quotient(e))

    rng = rng_for(seed, STREAM_PROBE)
    n_out = d.p - O.q
    for _ in range(samples):
        v = np.zeros(d.p)
        v[idx] = rng.standard_normal(O.q)
        budget = 7.0 * np.abs(v[idx]).sum()
        if n_out:
            w = rng.standard_normal(n_out)
            l1 = np.abs(w).sum()
            if l1 > 0:
                v[~mask] = w * (rng.uniform() * budget / l1)
        best = min(best, quotient(v))

    bound = l2_bound(O.q, d.p, d.n, K)
    return BoundCheck(kappa_estimate=best, bound_value=bound, K=K,
                      holds=best > 0.0)
