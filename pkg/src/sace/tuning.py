"""Hyperparameter grids, 10-fold cross-validation, post-fit thresholding,
and the bisection search for an exact selected-set size.

Cross-validation is prediction oriented: each fold re-standardizes its
training rows, refits the initial estimator inside the fold at every
candidate penalty level (no leakage), and scores mean squared prediction
error on the held-out rows. Fold assignment and therefore the whole table
are deterministic functions of the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import (
    CoefficientVector,
    Dataset,
    StandardizationRecord,
    predict,
    standardize,
)
from .errors import ConstantColumnError, NoConvergenceError, UnachievableError
from .rng import STREAM_CV, rng_for
from .solvers import (
    FitResult,
    InitialEstimate,
    InitialSource,
    Method,
    fit_elastic_net,
    fit_gsace,
    fit_lasso,
    fit_mcp,
    fit_sace,
    initial_from_mcp,
)
from .data import extract_support

DEFAULT_DS = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_GAMMAS = (1.5, 3.0, 6.0)
DEFAULT_ELASTIC_NET_LAMBDA2 = 0.5  # matches the unit-ridge convention


def lambda_max(d: Dataset) -> float:
    """Smallest penalty level at which the lasso fit is exactly zero."""
    return float(np.max(np.abs(d.X.T @ d.y)))


@dataclass(frozen=True)
class Grid:
    """Candidate hyperparameters; lambdas strictly decreasing from
    lambda_max."""

    lambdas: tuple
    ds: tuple = DEFAULT_DS
    gammas: tuple = DEFAULT_GAMMAS

    def __post_init__(self):
        lams = tuple(float(l) for l in self.lambdas)
        if len(lams) < 1 or any(l <= 0 for l in lams):
            raise ValueError("lambdas must be positive")
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambdas must be strictly decreasing")
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "ds", tuple(float(v) for v in self.ds))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))


def make_grid(d: Dataset, n_lambda: int = 30, lambda_min_ratio: float = 1e-3,
              ds=None, gammas=None) -> Grid:
    """Log-spaced lambdas from lambda_max down to lambda_max * ratio."""
    if n_lambda < 2:
        raise ValueError("n_lambda must be >= 2")
    if not (0.0 < lambda_min_ratio < 1.0):
        raise ValueError("lambda_min_ratio must be in (0, 1)")
    top = lambda_max(d)
    lams = tuple(np.geomspace(top, top * lambda_min_ratio, n_lambda))
    return Grid(lambdas=lams,
                ds=DEFAULT_DS if ds is None else tuple(ds),
                gammas=DEFAULT_GAMMAS if gammas is None else tuple(gammas))


@dataclass(frozen=True)
class CvCell:
    """One grid point: mean/std of fold prediction errors. Unused axes are
    None. `failures` counts folds that did not produce a score."""

    lam: float
    d: float | None
    gamma: float | None
    mean_error: float
    std_error: float
    failures: int


@dataclass(frozen=True)
class CvResult:
    table: tuple
    best: CvCell
    folds: int
    seed: int

    def best_params(self):
        return self.best.lam, self.best.d, self.best.gamma


def fold_assignments(n: int, folds: int, seed) -> list:
    """Deterministic shuffled partition of range(n) into `folds` chunks."""
    perm = rng_for(seed, STREAM_CV).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _cells_for(method: Method, grid: Grid):
    """Axes actually tuned by each method, in scan order."""
    if method in (Method.LASSO, Method.ELASTIC_NET):
        return [(lam, None, None) for lam in grid.lambdas]
    if method is Method.MCP:
        return [(lam, None, g) for g in grid.gammas for lam in grid.lambdas]
    if method is Method.SACE:
        return [(lam, dv, None) for dv in grid.ds for lam in grid.lambdas]
    return [(lam, dv, g) for g in grid.gammas for dv in grid.ds
            for lam in grid.lambdas]


def _path_fit_errors(train: Dataset, record: StandardizationRecord,
                     X_out, y_out, method: Method, grid: Grid,
                     lambda2: float, stabilized: bool):
    """Fit every grid cell on `train` (warm-started along each lambda path)
    and score it on the held-out block.

    With `stabilized` the score is the held-out mean squared prediction
    error plus the fit's own ridge stabilizer scaled per training row,
    ridge_weight * ||b||^2 / n_train; otherwise plain prediction error.
    For lasso and MCP (ridge weight 0) the two coincide. For the
    ridge-bearing estimators the norm term is what lets the score see the
    adjustment weight at all: at d = 1 with a same-lambda initializer the
    fit collapses onto the initializer exactly, so raw prediction error
    can never distinguish a debiased refit of the initial estimate from a
    genuinely grouped solution, while their coefficient norms differ by an
    order of magnitude on correlated designs.

    Returns {cell_key: score or None}; None marks a failed cell.
    """

    def score(fit):
        pred = predict(record, fit.beta, X_out)
        mse = float(np.mean((y_out - pred) ** 2))
        if not stabilized:
            return mse
        b = fit.beta.values
        return mse + fit.spec.ridge_weight * float(b @ b) / train.n

    errors = {}

    def run_path(cells, fitter, use_warm=True):
        # Warm starts along the lambda path are only safe for the convex
        # fits. The nonconvex ones inherit whichever stationary point the
        # top of the path visited (on correlated designs that is a
        # concentrated, badly biased point), so every MCP-family cell is
        # fit from zero and the full-data refit mirrors that construction.
        warm = None
        for key in cells:
            try:
                fit = fitter(key, warm if use_warm else None)
            except NoConvergenceError as exc:
                errors[key] = None
                warm = exc.result.beta
                continue
            errors[key] = score(fit)
            warm = fit.beta

    if method is Method.LASSO:
        run_path([(lam, None, None) for lam in grid.lambdas],
                 lambda key, warm: fit_lasso(train, key[0], warm))
    elif method is Method.ELASTIC_NET:
        run_path([(lam, None, None) for lam in grid.lambdas],
                 lambda key, warm: fit_elastic_net(train, key[0], lambda2, warm))
    elif method is Method.MCP:
        for g in grid.gammas:
            run_path([(lam, None, g) for lam in grid.lambdas],
                     lambda key, warm: fit_mcp(train, key[0], key[2], warm),
                     use_warm=False)
    elif method is Method.SACE:
        inits = _lasso_path_inits(train, grid.lambdas)
        for dv in grid.ds:
            run_path([(lam, dv, None) for lam in grid.lambdas],
                     lambda key, warm: fit_sace(train, key[0], key[1],
                                                init=inits[key[0]], warm=warm))
    elif method is Method.GSACE:
        # cold in lambda (see above) but warm in d at fixed (lambda, gamma):
        # the estimator is a continuous family in d, so tracking d upward
        # stays inside the basin the d = 0 fit starts from
        ds_sorted = sorted(grid.ds)
        for g in grid.gammas:
            inits = _mcp_path_inits(train, grid.lambdas, g)
            for lam in grid.lambdas:
                run_path([(lam, dv, g) for dv in ds_sorted],
                         lambda key, warm: fit_gsace(train, key[0], key[2],
                                                     key[1],
                                                     init=inits[key[0]],
                                                     warm=warm))
    else:
        raise ValueError(f"unknown method {method}")
    return errors


def _lasso_path_inits(train: Dataset, lambdas):
    """Initial estimators along a lasso path, one per candidate lambda."""
    inits, warm = {}, None
    for lam in lambdas:
        try:
            fit = fit_lasso(train, lam, warm)
            beta = fit.beta
        except NoConvergenceError as exc:
            beta = exc.result.beta
        warm = beta
        inits[lam] = InitialEstimate(
            beta0=beta, source=InitialSource.LASSO_SAME_LAMBDA,
            support0=extract_support(beta, tol=0.0))
    return inits


def _mcp_path_inits(train: Dataset, lambdas, gamma):
    # cold per lambda, matching how the MCP cells themselves are fit
    inits = {}
    for lam in lambdas:
        try:
            beta = fit_mcp(train, lam, gamma).beta
        except NoConvergenceError as exc:
            beta = exc.result.beta
        inits[lam] = InitialEstimate(
            beta0=beta, source=InitialSource.MCP_SAME_SETTINGS,
            support0=extract_support(beta, tol=0.0))
    return inits


def cross_validate(d: Dataset, method: Method, grid: Grid, seed,
                   lambda2: float = DEFAULT_ELASTIC_NET_LAMBDA2,
                   stabilized: bool = True) -> CvResult:
    """10-fold cross-validation over the grid axes used by `method`.

    With n < 10 it degrades to leave-one-out. Ties in mean error break
    toward larger lambda, then smaller d, then smaller gamma. With
    `stabilized=False` cells are scored by plain held-out prediction error
    (appropriate when cardinality is controlled separately, as in the
    exact-k tracking pipeline); the default adds the fit's ridge term, see
    `_path_fit_errors`.
    """
    folds = 10 if d.n >= 10 else d.n
    assignments = fold_assignments(d.n, folds, seed)
    keys = _cells_for(method, grid)
    per_fold = {key: [] for key in keys}
    failures = {key: 0 for key in keys}

    all_rows = np.arange(d.n)
    for test_rows in assignments:
        train_rows = np.setdiff1d(all_rows, test_rows)
        sub = Dataset(d.X[train_rows], d.y[train_rows])
        try:
            train, record = standardize(sub)
        except ConstantColumnError:
            for key in keys:
                failures[key] += 1
            continue
        errors = _path_fit_errors(train, record, d.X[test_rows],
                                  d.y[test_rows], method, grid, lambda2,
                                  stabilized)
        for key in keys:
            err = errors[key]
            if err is None or not math.isfinite(err):
                failures[key] += 1
            else:
                per_fold[key].append(err)

    table = []
    for key in keys:
        errs = per_fold[key]
        if errs:
            mean = float(np.mean(errs))
            std = float(np.std(errs, ddof=1)) if len(errs) > 1 else 0.0
        else:
            mean, std = float("inf"), float("inf")
        lam, dv, g = key
        table.append(CvCell(lam=lam, d=dv, gamma=g, mean_error=mean,
                            std_error=std, failures=failures[key]))

    def rank(cell):
        return (cell.mean_error, -cell.lam,
                cell.d if cell.d is not None else 0.0,
                cell.gamma if cell.gamma is not None else 0.0)

    best = min(table, key=rank)
    return CvResult(table=tuple(table), best=best, folds=folds, seed=seed)


def refit_best(d: Dataset, method: Method, cv: CvResult,
               lambda2: float = DEFAULT_ELASTIC_NET_LAMBDA2) -> FitResult:
    """Refit the CV-chosen cell on the full dataset, constructed exactly
    like the fold fits the table scored: warm-started down the lambda path
    for the convex methods, from zero for the MCP family."""
    lam, dv, g = cv.best_params()
    if method is Method.MCP:
        return fit_mcp(d, lam, g)
    if method is Method.GSACE:
        init = None
        warm = None
        fit = None
        for cur in sorted({c.d for c in cv.table
                           if c.d is not None and c.d <= dv}):
            if init is None:
                init = initial_from_mcp(d, lam, g)
            fit = fit_gsace(d, lam, g, cur, init=init, warm=warm)
            warm = fit.beta
        return fit
    lams = sorted({c.lam for c in cv.table if c.lam >= lam}, reverse=True)
    warm = None
    fit = None
    if method is Method.SACE:
        inits = _lasso_path_inits(d, lams)
    for cur in lams:
        if method is Method.LASSO:
            fit = fit_lasso(d, cur, warm)
        elif method is Method.ELASTIC_NET:
            fit = fit_elastic_net(d, cur, lambda2, warm)
        else:
            fit = fit_sace(d, cur, dv, init=inits[cur], warm=warm)
        warm = fit.beta
    return fit


@dataclass(frozen=True)
class ThresholdRule:
    """Hard-threshold level sigma_hat * sqrt(2 log p) from the spread of
    small-magnitude coefficients."""

    sigma_hat: float
    cutoff: float
    small_fraction: float


def apply_threshold(beta: CoefficientVector, p: int | None = None,
                    small_fraction: float = 0.85):
    """Zero every coefficient with |b_j| <= sigma_hat * sqrt(2 log p).

    sigma_hat is the sample standard deviation of the nonzero coefficients
    whose magnitude sits at or below the `small_fraction` quantile of the
    nonzero magnitudes. Exact zeros are excluded from the spread estimate:
    they carry no scale information, and a solver that already produces
    sparse estimates would otherwise drive sigma_hat (and the rule) to
    zero whenever more than `small_fraction` of the coefficients are zero.
    The fraction is a stated convention, not a tuned constant.
    """
    if not (0.0 < small_fraction < 1.0):
        raise ValueError("small_fraction must be in (0, 1)")
    values = beta.values
    if p is None:
        p = values.shape[0]
    mags = np.abs(values)
    nonzero = values[mags > 0]
    if nonzero.size == 0:
        return beta, ThresholdRule(0.0, 0.0, small_fraction)
    q = np.quantile(np.abs(nonzero), small_fraction)
    small = nonzero[np.abs(nonzero) <= q]
    sigma_hat = float(np.std(small, ddof=1)) if small.size > 1 else 0.0
    cutoff = sigma_hat * math.sqrt(2.0 * math.log(p))
    out = np.where(mags <= cutoff, 0.0, values)
    return CoefficientVector(out), ThresholdRule(sigma_hat, cutoff,
                                                 small_fraction)


def _fit_for_count(d: Dataset, method: Method, lam: float, dparam, gamma,
                   lambda2, warm):
    if method is Method.LASSO:
        return fit_lasso(d, lam, warm)
    if method is Method.ELASTIC_NET:
        return fit_elastic_net(d, lam, lambda2, warm)
    if method is Method.MCP:
        return fit_mcp(d, lam, gamma, warm)
    if method is Method.SACE:
        return fit_sace(d, lam, dparam, warm=warm)
    return fit_gsace(d, lam, gamma, dparam, warm=warm)


def select_exact_k(d: Dataset, method: Method, k: int, dparam: float = 0.5,
                   gamma: float = 3.0,
                   lambda2: float = DEFAULT_ELASTIC_NET_LAMBDA2,
                   max_bisect: int = 60):
    """Bisection on log lambda until the fit has exactly k nonzeros.

    Returns (lam, FitResult). Raises UnachievableError carrying the closest
    fit when cardinality jumps over k everywhere in the bracket.
    """
    if k < 0 or k > min(d.n, d.p):
        raise ValueError(f"k={k} outside [0, min(n, p)]")
    top = lambda_max(d)

    warm_cache = {"warm": None}

    def eval_at(lam):
        try:
            fit = _fit_for_count(d, method, lam, dparam, gamma, lambda2,
                                 warm_cache["warm"])
        except NoConvergenceError as exc:
            fit = exc.result
        warm_cache["warm"] = fit.beta
        return fit, len(fit.beta.support)

    hi = top
    fit_hi, count_hi = eval_at(hi)
    if count_hi == k:
        return hi, fit_hi
    closest = (abs(count_hi - k), hi, fit_hi, count_hi)

    lo = top
    fit_lo, count_lo = fit_hi, count_hi
    for _ in range(60):
        lo /= 2.0
        fit_lo, count_lo = eval_at(lo)
        if abs(count_lo - k) < closest[0]:
            closest = (abs(count_lo - k), lo, fit_lo, count_lo)
        if count_lo == k:
            return lo, fit_lo
        if count_lo > k:
            break
    else:
        raise UnachievableError(k, closest[3], closest[1], closest[2])

    for _ in range(max_bisect):
        mid = math.sqrt(lo * hi)
        fit_mid, count_mid = eval_at(mid)
        if abs(count_mid - k) < closest[0]:
            closest = (abs(count_mid - k), mid, fit_mid, count_mid)
        if count_mid == k:
            return mid, fit_mid
        if count_mid > k:
            lo = mid
        else:
            hi = mid
    raise UnachievableError(k, closest[3], closest[1], closest[2])
