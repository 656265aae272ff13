"""Cyclic coordinate-descent fitters and stationarity diagnostics.

Five estimators share one kernel: lasso, naive elastic net, MCP, and the two
smooth-adjustment estimators (SACE: l1 + fixed ridge + reversed adaptive
term; GSACE: the same with MCP replacing l1). Fits are deterministic given
their inputs, and a returned result always satisfies its stationarity system
within `kkt_tol`; otherwise NoConvergenceError carries the best iterate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from ._cd import cd_solve
from .data import CoefficientVector, Dataset, SupportSet, extract_support
from .errors import (
    BadDError,
    BadGammaError,
    DimensionMismatchError,
    NoConvergenceError,
)
from .penalties import (
    PenaltyFamily,
    PenaltySpec,
    elastic_net_objective,
    gsace_objective,
    lasso_objective,
    mcp_derivative,
    mcp_objective,
    mcp_value,
    sace_objective,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 10_000
DEFAULT_KKT_TOL = 1e-7

_EMPTY_TRACE = np.empty(0)


class Method(enum.Enum):
    LASSO = "lasso"
    ELASTIC_NET = "en"
    MCP = "mcp"
    SACE = "sace"
    GSACE = "gsace"


class InitialSource(enum.Enum):
    LASSO_SAME_LAMBDA = "lasso_same_lambda"
    MCP_SAME_SETTINGS = "mcp_same_settings"
    USER_SUPPLIED = "user_supplied"


@dataclass(frozen=True)
class InitialEstimate:
    """Plug-in initial estimator feeding the reversed adaptive term."""

    beta0: CoefficientVector
    source: InitialSource
    support0: SupportSet

    @classmethod
    def from_vector(cls, values, source=InitialSource.USER_SUPPLIED):
        beta0 = values if isinstance(values, CoefficientVector) \
            else CoefficientVector(values)
        return cls(beta0=beta0, source=source,
                   support0=extract_support(beta0, tol=0.0))


@dataclass(frozen=True)
class KktReport:
    """Stationarity diagnostics of one fit.

    correlations: c_j = X_j'(y - X b) - ridge*b_j + d*beta0_j, the
    generalized correlation whose absolute value meets the active penalty
    level on the equicorrelation set.
    """

    correlations: np.ndarray
    equicorrelation_set: SupportSet
    tau: np.ndarray
    max_violation: float


@dataclass(frozen=True)
class FitResult:
    beta: CoefficientVector
    spec: PenaltySpec
    method: Method
    iterations: int
    converged: bool
    objective: float
    kkt: KktReport
    init: InitialEstimate | None = None


def _warm_array(warm, p):
    if warm is None:
        return np.zeros(p)
    values = warm.values if isinstance(warm, CoefficientVector) else \
        np.asarray(warm, dtype=np.float64).ravel()
    if values.shape[0] != p:
        raise DimensionMismatchError("warm start length must equal p")
    return np.array(values, dtype=np.float64)


def _shift_vector(d: Dataset, spec: PenaltySpec, init: InitialEstimate | None):
    if init is None or spec.d == 0.0:
        return np.zeros(d.p)
    if init.beta0.p != d.p:
        raise DimensionMismatchError("beta0 length must equal p")
    return spec.d * init.beta0.values


def _penalty_levels(spec: PenaltySpec, beta: np.ndarray, n: int):
    """Active-penalty level per coordinate (lam at zero)."""
    if spec.family is PenaltyFamily.L1:
        return np.full(beta.shape[0], spec.lam)
    levels = np.asarray(mcp_derivative(beta, spec.lam, spec.gamma, n),
                        dtype=np.float64)
    return levels


def _build_kkt(d: Dataset, beta: np.ndarray, spec: PenaltySpec,
               shift: np.ndarray) -> KktReport:
    r = d.y - d.X @ beta
    c = d.X.T @ r - spec.ridge_weight * beta + shift
    levels = _penalty_levels(spec, beta, d.n)
    active = beta != 0.0
    viol = np.where(active,
                    np.abs(c - levels * np.sign(beta)),
                    np.maximum(np.abs(c) - spec.lam, 0.0))
    eq_tol = max(1e-6 * spec.lam, 1e-10)
    member_level = np.where(active, levels, spec.lam)
    in_xi = np.abs(np.abs(c) - member_level) <= eq_tol
    xi = SupportSet(tuple(np.flatnonzero(in_xi)))
    tau = np.where(in_xi, np.sign(c), 0.0)
    return KktReport(correlations=c, equicorrelation_set=xi, tau=tau,
                     max_violation=float(viol.max(initial=0.0)))


def _objective_value(d, beta_cv, spec, method, init):
    beta0 = init.beta0 if init is not None else CoefficientVector.zeros(d.p)
    if method is Method.LASSO:
        return lasso_objective(d, beta_cv, spec.lam)
    if method is Method.ELASTIC_NET:
        return elastic_net_objective(d, beta_cv, spec.lam,
                                     spec.ridge_weight / 2.0)
    if method is Method.MCP:
        return mcp_objective(d, beta_cv, spec.lam, spec.gamma)
    if method is Method.SACE:
        return sace_objective(d, beta_cv, spec, beta0)
    return gsace_objective(d, beta_cv, spec, beta0)


def _check_gamma(d: Dataset, spec: PenaltySpec):
    if spec.family is not PenaltyFamily.MCP:
        return
    n = d.n
    if spec.ridge_weight > 0.0:
        if n + spec.ridge_weight - n / spec.gamma <= 0.0:
            raise BadGammaError(
                f"gamma={spec.gamma} gives non-convex subproblems "
                f"(n + 1 - n/gamma <= 0 for n={n})")
    elif spec.gamma <= 1.0:
        raise BadGammaError("plain MCP needs gamma > 1")
    # column norms can differ from n on non-standardized data
    min_colsq = float(d.column_norms_sq().min())
    if min_colsq + spec.ridge_weight - n / spec.gamma <= 0.0:
        raise BadGammaError(
            f"gamma={spec.gamma} too small for the weakest column "
            f"(||X_j||^2={min_colsq:.3g}, n={n})")


def _raw_objective(d: Dataset, beta: np.ndarray, spec: PenaltySpec,
                   shift: np.ndarray) -> float:
    """Objective in the kernel's canonical form (shift folds in d*beta0)."""
    r = d.y - d.X @ beta
    val = 0.5 * float(r @ r) + 0.5 * spec.ridge_weight * float(beta @ beta) \
        - float(shift @ beta)
    if spec.family is PenaltyFamily.L1:
        return val + spec.lam * float(np.abs(beta).sum())
    return val + float(np.sum(mcp_value(beta, spec.lam, spec.gamma, d.n)))


def _max_violation(d: Dataset, beta: np.ndarray, spec: PenaltySpec,
                   shift: np.ndarray) -> float:
    return _build_kkt(d, beta, spec, shift).max_violation


def _restricted_solve(d: Dataset, A: np.ndarray, s: np.ndarray,
                      trans: np.ndarray | None, spec: PenaltySpec,
                      shift: np.ndarray):
    """Solve the stationarity equalities on active set A with signs s.

    For the MCP family, `trans` marks coordinates assumed inside the
    penalty's transition region (linear derivative); the others are assumed
    saturated (zero derivative).
    """
    XA = d.X[:, A]
    G = XA.T @ XA + spec.ridge_weight * np.eye(A.size)
    rhs = XA.T @ d.y + shift[A]
    if spec.family is PenaltyFamily.L1:
        rhs = rhs - spec.lam * s
    else:
        G = G - (d.n / spec.gamma) * np.diag(trans.astype(float))
        rhs = rhs - spec.lam * s * trans
    try:
        sol = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(G, rhs, rcond=None)[0]
    return sol


def _active_set_refine(d: Dataset, beta: np.ndarray, spec: PenaltySpec,
                       shift: np.ndarray, kkt_tol: float):
    """Iterative exact active-set solve seeded by the current CD iterate.

    Coordinate descent crawls on nearly collinear active columns, so once
    it has localized a candidate active set we pivot: solve the restricted
    stationarity system, drop coordinates whose solved sign contradicts the
    assumption, admit the worst outside violator, and repeat. Each step is
    a dense solve on at most ~n coordinates. Returns a candidate iterate or
    None; the caller only accepts candidates that lower both the objective
    and the KKT residual, which keeps the nonconvex cases safe.
    """
    A = np.flatnonzero(beta != 0.0)
    if A.size == 0 or A.size > 4 * d.n:
        return None
    s = np.sign(beta[A])
    knot = np.inf
    trans = None
    if spec.family is PenaltyFamily.MCP:
        knot = spec.gamma * spec.lam / d.n if spec.lam > 0 else 0.0
        trans = np.abs(beta[A]) <= knot

    best = None
    for _ in range(8 * max(4, min(d.n, d.p))):
        if A.size == 0 or A.size > 4 * d.n:
            break
        sol = _restricted_solve(d, A, s, trans, spec, shift)
        if not np.isfinite(sol).all():
            return best
        mismatch = np.sign(sol) != s
        if mismatch.any():
            # drop the worst sign contradiction and re-solve
            drop = np.argmax(np.abs(sol) * mismatch)
            keep = np.ones(A.size, dtype=bool)
            keep[drop] = False
            A, s = A[keep], s[keep]
            if trans is not None:
                trans = trans[keep]
            continue
        if trans is not None:
            region = np.abs(sol) <= knot
            if not np.array_equal(region, trans):
                trans = region
                continue
        candidate = np.zeros(d.p)
        candidate[A] = sol
        best = candidate
        # admit the single worst violator outside the active set
        r = d.y - d.X @ candidate
        c = d.X.T @ r - spec.ridge_weight * candidate + shift
        outside = np.abs(c) - spec.lam
        outside[A] = -np.inf
        j = int(np.argmax(outside))
        if outside[j] <= 0.5 * kkt_tol:
            return candidate
        A = np.append(A, j)
        s = np.append(s, np.sign(c[j]))
        if trans is not None:
            trans = np.append(trans, True)
        order = np.argsort(A)
        A, s = A[order], s[order]
        if trans is not None:
            trans = trans[order]
    return best


def _run_fit(d: Dataset, spec: PenaltySpec, method: Method,
             init: InitialEstimate | None, warm, tol, max_sweeps, kkt_tol,
             obj_trace=None) -> FitResult:
    _check_gamma(d, spec)
    beta = _warm_array(warm, d.p)
    shift = _shift_vector(d, spec, init)
    family = 0 if spec.family is PenaltyFamily.L1 else 1
    gamma = spec.gamma if spec.gamma is not None else 0.0
    trace = obj_trace if obj_trace is not None else _EMPTY_TRACE
    # kernel target sits below kkt_tol so last-ulp differences between the
    # kernel's loops and the numpy recomputation cannot flip convergence
    kernel_target = 0.5 * kkt_tol

    total_sweeps = 0
    traced_total = 0
    converged = False
    chunk = 200
    while total_sweeps < max_sweeps:
        budget = min(chunk, max_sweeps - total_sweeps)
        sub_trace = trace[traced_total:] if trace.shape[0] else _EMPTY_TRACE
        sweeps, conv, _, traced = cd_solve(
            d.X, d.y, beta, shift, spec.lam, gamma, float(d.n),
            spec.ridge_weight, family, tol, budget, kernel_target, sub_trace)
        total_sweeps += int(sweeps)
        traced_total += int(traced)
        if conv:
            converged = True
            break
        candidate = _active_set_refine(d, beta, spec, shift, kkt_tol)
        if candidate is not None:
            obj_cur = _raw_objective(d, beta, spec, shift)
            obj_cand = _raw_objective(d, candidate, spec, shift)
            if obj_cand <= obj_cur + 1e-12 * max(1.0, abs(obj_cur)):
                viol_cand = _max_violation(d, candidate, spec, shift)
                if viol_cand < _max_violation(d, beta, spec, shift):
                    beta = candidate
                    if trace.shape[0] and traced_total < trace.shape[0]:
                        trace[traced_total] = obj_cand
                        traced_total += 1
                    if viol_cand <= kkt_tol:
                        converged = True
                        break
        chunk = min(chunk * 2, 2000)

    viol = _max_violation(d, beta, spec, shift)
    converged = converged and viol <= kkt_tol
    beta_cv = CoefficientVector(beta)
    result = FitResult(
        beta=beta_cv, spec=spec, method=method, iterations=total_sweeps,
        converged=bool(converged),
        objective=_objective_value(d, beta_cv, spec, method, init),
        kkt=_build_kkt(d, beta, spec, shift), init=init)
    if not converged:
        raise NoConvergenceError(result, max_sweeps)
    return result


def fit_lasso(d: Dataset, lam: float, warm=None, *, tol=DEFAULT_TOL,
              max_sweeps=DEFAULT_MAX_SWEEPS, kkt_tol=DEFAULT_KKT_TOL,
              obj_trace=None) -> FitResult:
    """l1-penalized least squares: 0.5*||y - X b||^2 + lam*||b||_1."""
    spec = PenaltySpec(PenaltyFamily.L1, lam)
    return _run_fit(d, spec, Method.LASSO, None, warm, tol, max_sweeps,
                    kkt_tol, obj_trace)


def fit_elastic_net(d: Dataset, lam1: float, lam2: float, warm=None, *,
                    tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
                    kkt_tol=DEFAULT_KKT_TOL, obj_trace=None) -> FitResult:
    """Naive elastic net: 0.5*||y - X b||^2 + lam1*||b||_1 + lam2*||b||^2."""
    if lam2 < 0:
        raise ValueError("lam2 must be nonnegative")
    spec = PenaltySpec(PenaltyFamily.L1, lam1, ridge_weight=2.0 * lam2)
    return _run_fit(d, spec, Method.ELASTIC_NET, None, warm, tol, max_sweeps,
                    kkt_tol, obj_trace)


def fit_mcp(d: Dataset, lam: float, gamma: float, warm=None, *,
            tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
            kkt_tol=DEFAULT_KKT_TOL, obj_trace=None) -> FitResult:
    """MCP-penalized least squares (gamma > 1); firm-threshold updates."""
    spec = PenaltySpec(PenaltyFamily.MCP, lam, gamma=gamma)
    return _run_fit(d, spec, Method.MCP, None, warm, tol, max_sweeps,
                    kkt_tol, obj_trace)


def initial_from_lasso(d: Dataset, lam: float, warm=None) -> InitialEstimate:
    fit = fit_lasso(d, lam, warm)
    return InitialEstimate(beta0=fit.beta, source=InitialSource.LASSO_SAME_LAMBDA,
                           support0=extract_support(fit.beta, tol=0.0))


def initial_from_mcp(d: Dataset, lam: float, gamma: float,
                     warm=None) -> InitialEstimate:
    fit = fit_mcp(d, lam, gamma, warm)
    return InitialEstimate(beta0=fit.beta, source=InitialSource.MCP_SAME_SETTINGS,
                           support0=extract_support(fit.beta, tol=0.0))


def fit_sace(d: Dataset, lam: float, dparam: float,
             init: InitialEstimate | None = None, warm=None, *,
             tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
             kkt_tol=DEFAULT_KKT_TOL, obj_trace=None) -> FitResult:
    """Smooth adjustment for correlated effects.

    Minimizes 0.5*||y - X b||^2 + 0.5*||b||^2 + lam*||b||_1 - d*beta0'b.
    When `init` is omitted, beta0 comes from the lasso at the same lam.
    """
    if not (0.0 <= dparam <= 1.0):
        raise BadDError(f"d={dparam} outside [0, 1]")
    if init is None:
        init = initial_from_lasso(d, lam)
    spec = PenaltySpec(PenaltyFamily.L1, lam, d=dparam, ridge_weight=1.0)
    return _run_fit(d, spec, Method.SACE, init, warm, tol, max_sweeps,
                    kkt_tol, obj_trace)


def fit_gsace(d: Dataset, lam: float, gamma: float, dparam: float,
              init: InitialEstimate | None = None, warm=None, *,
              tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
              kkt_tol=DEFAULT_KKT_TOL, obj_trace=None) -> FitResult:
    """Generalized smooth adjustment: MCP penalty plus the reversed term.

    Requires n + 1 - n/gamma > 0 so every coordinate subproblem is strictly
    convex. When `init` is omitted, beta0 comes from MCP at the same
    (lam, gamma).
    """
    if not (0.0 <= dparam <= 1.0):
        raise BadDError(f"d={dparam} outside [0, 1]")
    if init is None:
        init = initial_from_mcp(d, lam, gamma)
    spec = PenaltySpec(PenaltyFamily.MCP, lam, gamma=gamma, d=dparam,
                       ridge_weight=1.0)
    return _run_fit(d, spec, Method.GSACE, init, warm, tol, max_sweeps,
                    kkt_tol, obj_trace)


def kkt_check(d: Dataset, fit: FitResult,
              init: InitialEstimate | None = None) -> KktReport:
    """Recompute the stationarity report of a fit on its dataset."""
    if init is None:
        init = fit.init
    shift = _shift_vector(d, fit.spec, init)
    return _build_kkt(d, fit.beta.values, fit.spec, shift)


def explicit_solution_on_set(d: Dataset, xi: SupportSet, lam: float,
                             dparam: float, tau,
                             init: InitialEstimate | None) -> CoefficientVector:
    """Closed-form SACE coefficients on a candidate equicorrelation set.

    Solves (X_xi' X_xi + I) b = X_xi' y + d*beta0_xi - lam*tau and places
    zeros elsewhere. `tau` may have length p or len(xi).
    """
    beta = np.zeros(d.p)
    if xi.q == 0:
        return CoefficientVector(beta)
    idx = xi.as_array()
    tau = np.asarray(tau, dtype=np.float64).ravel()
    if tau.shape[0] == d.p:
        tau = tau[idx]
    elif tau.shape[0] != xi.q:
        raise DimensionMismatchError("tau must have length p or |xi|")
    beta0 = init.beta0.values if init is not None else np.zeros(d.p)
    Xs = d.X[:, idx]
    A = Xs.T @ Xs + np.eye(xi.q)
    rhs = Xs.T @ d.y + dparam * beta0[idx] - lam * tau
    beta[idx] = np.linalg.solve(A, rhs)
    return CoefficientVector(beta)
