"""Index-tracking pipeline: price ingestion, rolling windows, exact-size
sparse replication fits, and annualized tracking-error reporting.

The regression is on price levels (a column per candidate stock, the index
as response); each rolling window standardizes its training block, finds
the penalty level that selects exactly the target number of stocks, and
scores replication error in and out of sample. The annualization factor
sqrt(250) assumes daily rows.
"""

from __future__ import annotations

import concurrent.futures as _futures
import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .data import CoefficientVector, Dataset, predict, standardize
from .errors import (
    EmptyPanelError,
    NonMonotoneDatesError,
    ParseError,
    TooFewSamplesError,
    TooShortError,
    UnachievableError,
)
from .rng import STREAM_PANEL, STREAM_TRACK, rng_for, seed_sequence
from .solvers import Method
from .tuning import Grid, cross_validate, select_exact_k

ANNUALIZATION = math.sqrt(250.0)
_MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class PricePanel:
    """Date-sorted price history for an index and its candidate stocks."""

    dates: tuple
    tickers: tuple
    prices: np.ndarray        # T x m
    index_series: np.ndarray  # length T
    dropped: tuple = ()

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        idx = np.asarray(self.index_series, dtype=np.float64).ravel()
        if prices.ndim != 2 or prices.shape[0] != idx.shape[0]:
            raise ValueError("prices must be T x m aligned with the index")
        if prices.shape[1] != len(self.tickers):
            raise ValueError("tickers must align with price columns")
        if prices.shape[0] == 0 or prices.shape[1] == 0:
            raise EmptyPanelError("panel has no data")
        if not (np.isfinite(prices).all() and np.isfinite(idx).all()):
            raise ValueError("panel values must be finite after cleaning")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise NonMonotoneDatesError("dates must be strictly increasing")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "index_series", idx)
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def m(self) -> int:
        return self.prices.shape[1]


def load_prices(path) -> PricePanel:
    """Read a CSV with header `date,index,<ticker>...`, ISO dates, numeric
    prices. Tickers with any missing cell are dropped with a warning."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3:
            raise ParseError(1, "need header `date,index,ticker...`")
        tickers = [h.strip() for h in header[2:]]
        dates, index_vals, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno,
                                 f"expected {len(header)} fields, got {len(row)}")
            try:
                dates.append(date.fromisoformat(row[0].strip()))
            except ValueError:
                raise ParseError(lineno, f"bad date {row[0]!r}") from None
            try:
                index_vals.append(float(row[1]))
            except ValueError:
                raise ParseError(lineno, f"bad index value {row[1]!r}") from None
            vals = []
            for cell in row[2:]:
                cell = cell.strip()
                if cell.lower() in _MISSING:
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(lineno, f"bad price {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise EmptyPanelError("no data rows")
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise NonMonotoneDatesError("dates must be strictly increasing")
    prices = np.asarray(rows, dtype=np.float64)
    keep = ~np.isnan(prices).any(axis=0)
    dropped = tuple(t for t, ok in zip(tickers, keep) if not ok)
    if dropped:
        warnings.warn(f"dropped tickers with missing values: {dropped}")
    if not keep.any():
        raise EmptyPanelError("all tickers had missing values")
    return PricePanel(dates=tuple(d.isoformat() for d in dates),
                      tickers=tuple(t for t, ok in zip(tickers, keep) if ok),
                      prices=prices[:, keep],
                      index_series=np.asarray(index_vals),
                      dropped=dropped)


@dataclass(frozen=True)
class WindowSplit:
    """Contiguous train rows followed immediately by test rows."""

    window_id: int
    train_rows: np.ndarray
    test_rows: np.ndarray

    def __post_init__(self):
        tr = np.asarray(self.train_rows, dtype=np.intp)
        te = np.asarray(self.test_rows, dtype=np.intp)
        if tr.size == 0 or te.size == 0 or te[0] != tr[-1] + 1:
            raise ValueError("test rows must directly follow train rows")
        object.__setattr__(self, "train_rows", tr)
        object.__setattr__(self, "test_rows", te)


def make_windows(panel: PricePanel, train: int = 100, test: int = 20,
                 stride: int | None = None):
    """Maximal list of rolling windows with the given stride (default:
    stride = test, so forecast segments tile without overlap)."""
    if stride is None:
        stride = test
    if train < 2 or test < 1 or stride < 1:
        raise ValueError("need train >= 2, test >= 1, stride >= 1")
    if panel.T < train + test:
        raise TooShortError(
            f"panel has {panel.T} rows; needs at least {train + test}")
    windows = []
    start = 0
    wid = 0
    while start + train + test <= panel.T:
        windows.append(WindowSplit(window_id=wid,
                                   train_rows=np.arange(start, start + train),
                                   test_rows=np.arange(start + train,
                                                       start + train + test)))
        start += stride
        wid += 1
    return windows


def tracking_error(err) -> float:
    """sqrt(250) * sqrt(sum((err_t - mean)^2) / (T - 1))."""
    err = np.asarray(err, dtype=np.float64).ravel()
    if err.size < 2:
        raise TooFewSamplesError("tracking error needs at least 2 samples")
    return float(ANNUALIZATION * np.std(err, ddof=1))


@dataclass(frozen=True)
class TrackReport:
    window_id: int
    method: str
    selected: tuple
    fitted_te: float
    predicted_te: float
    replication_train: np.ndarray
    replication_test: np.ndarray
    lam: float
    d: float | None
    gamma: float | None
    exact_k: bool
    n_selected: int


@dataclass(frozen=True)
class TrackingConfig:
    k: int = 50
    train: int = 100
    test: int = 20
    stride: int | None = None
    dparam: float | None = None    # None: choose by CV at the exact-k lambda
    gamma: float | None = None
    lambda2: float = 0.5
    errors_on: str = "price"       # or "returns"
    seed: int = 0
    jobs: int = 1
    max_bisect: int = 60
    tune_margin: float = 0.10      # required edge over the d = 1 anchor

    def __post_init__(self):
        if self.errors_on not in ("price", "returns"):
            raise ValueError("errors_on must be 'price' or 'returns'")


def _returns(series):
    series = np.asarray(series, dtype=np.float64)
    return series[1:] / series[:-1] - 1.0


def _replication_errors(actual, predicted, errors_on):
    if errors_on == "returns":
        return _returns(actual) - _returns(predicted)
    return np.asarray(actual) - np.asarray(predicted)


def _needs_d(method: Method) -> bool:
    return method in (Method.SACE, Method.GSACE)


def _needs_gamma(method: Method) -> bool:
    return method in (Method.MCP, Method.GSACE)


_TUNE_DS = tuple(round(0.1 * i, 1) for i in range(11))
_TUNE_GAMMAS = (1.5, 3.0, 6.0)


def _tune_on_tail(panel: PricePanel, w: WindowSplit, method: Method,
                  cfg: TrackingConfig, d0: float, g0: float,
                  tune_d: bool, tune_g: bool):
    """Choose d and/or gamma on a time-ordered holdout inside the window.

    Each candidate is judged by what the pipeline will actually do with
    it: fit exactly k assets on the head of the training block, then score
    the replication's tracking error on the held-back tail. Comparing
    fixed-lambda fits across d instead would be misleading, because at a
    fixed penalty level the selected cardinality swings with d.
    """
    tail = min(cfg.test, max(2, w.train_rows.size // 5))
    folds = []
    for end in (w.train_rows.size - tail, w.train_rows.size):
        head_rows = w.train_rows[:end - tail]
        if head_rows.size < max(2 * tail, cfg.k + 2):
            continue
        folds.append((head_rows, w.train_rows[end - tail:end]))
    if not folds:
        folds = [(w.train_rows[:-tail], w.train_rows[-tail:])]

    prepared = []
    for head_rows, val_rows in folds:
        head, record = standardize(Dataset(panel.prices[head_rows],
                                           panel.index_series[head_rows]))
        prepared.append((head, record, panel.prices[val_rows],
                         panel.index_series[val_rows]))

    fold_tes = {}
    for gv in (_TUNE_GAMMAS if tune_g else (g0,)):
        for dv in (_TUNE_DS if tune_d else (d0,)):
            tes = []
            for head, record, X_val, y_val in prepared:
                try:
                    _, fit = select_exact_k(head, method, cfg.k, dparam=dv,
                                            gamma=gv, lambda2=cfg.lambda2,
                                            max_bisect=cfg.max_bisect)
                except UnachievableError as exc:
                    fit = exc.closest_fit
                yhat = predict(record, fit.beta, X_val)
                tes.append(tracking_error(
                    _replication_errors(y_val, yhat, cfg.errors_on)))
            fold_tes[(dv, gv)] = tes
    scores = {k: float(np.mean(v)) for k, v in fold_tes.items()}

    (best_d, best_g), best_te = min(scores.items(), key=lambda kv: (kv[1], kv[0]))
    # validation windows are short, so deviating from the d = 1 anchor
    # (where the fit collapses onto its initializer) must be earned: the
    # winner has to beat the anchor by a clear margin on the mean and on
    # every validation fold separately
    if tune_d and best_d != 1.0:
        anchored = {k: v for k, v in scores.items() if k[0] == 1.0}
        if anchored:
            (anchor_key, anchor_te) = min(anchored.items(),
                                          key=lambda kv: (kv[1], kv[0]))
            consistent = all(c <= a for c, a in zip(fold_tes[(best_d, best_g)],
                                                    fold_tes[anchor_key]))
            if best_te > (1.0 - cfg.tune_margin) * anchor_te or not consistent:
                best_d, best_g = anchor_key
    return best_d, best_g


def track_window(panel: PricePanel, w: WindowSplit, method,
                 dparam: float | None = None, gamma: float | None = None,
                 config: TrackingConfig | None = None) -> TrackReport:
    """Fit one rolling window: standardize the training block, pick the
    penalty level selecting exactly k stocks, score fitted and predicted
    tracking errors.

    With dparam/gamma omitted, the relevant ones are chosen on a holdout
    tail of the training block (see `_tune_on_tail`), then the exact-k
    search runs on the full training block at the chosen values.
    """
    cfg = config or TrackingConfig()
    method = Method(method)
    dparam = dparam if dparam is not None else cfg.dparam
    gamma = gamma if gamma is not None else cfg.gamma

    X_tr = panel.prices[w.train_rows]
    y_tr = panel.index_series[w.train_rows]
    ds, record = standardize(Dataset(X_tr, y_tr))

    d0 = dparam if dparam is not None else 0.5
    g0 = gamma if gamma is not None else 3.0

    def search(dv, gv):
        try:
            lam, fit = select_exact_k(ds, method, cfg.k, dparam=dv, gamma=gv,
                                      lambda2=cfg.lambda2,
                                      max_bisect=cfg.max_bisect)
            return lam, fit, True
        except UnachievableError as exc:
            return exc.closest_lambda, exc.closest_fit, False

    tune_d = dparam is None and _needs_d(method)
    tune_g = gamma is None and _needs_gamma(method)
    if tune_d or tune_g:
        d0, g0 = _tune_on_tail(panel, w, method, cfg, d0, g0, tune_d, tune_g)
    lam, fit, exact = search(d0, g0)

    yhat_tr = predict(record, fit.beta, X_tr)
    yhat_te = predict(record, fit.beta, panel.prices[w.test_rows])
    y_te = panel.index_series[w.test_rows]
    fitted = tracking_error(_replication_errors(y_tr, yhat_tr, cfg.errors_on))
    predicted = tracking_error(_replication_errors(y_te, yhat_te,
                                                   cfg.errors_on))
    support = fit.beta.support
    return TrackReport(
        window_id=w.window_id, method=method.value,
        selected=tuple(panel.tickers[j] for j in support),
        fitted_te=fitted, predicted_te=predicted,
        replication_train=yhat_tr, replication_test=yhat_te,
        lam=lam, d=d0 if _needs_d(method) else None,
        gamma=g0 if _needs_gamma(method) else None,
        exact_k=exact, n_selected=len(support))


def _window_worker(args):
    panel, w, method, cfg = args
    return track_window(panel, w, method, config=cfg)


def run_tracking(panel: PricePanel, methods, config: TrackingConfig | None = None):
    """All windows for all methods. Returns (reports, summary dict).

    Windows are independent; `jobs` parallelizes them without affecting
    the assembled output.
    """
    cfg = config or TrackingConfig()
    windows = make_windows(panel, cfg.train, cfg.test, cfg.stride)
    methods = tuple(Method(m).value for m in methods)
    tasks = [(panel, w, method, cfg) for method in methods for w in windows]
    if cfg.jobs > 1 and len(tasks) > 1:
        with _futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(_window_worker, tasks))
    else:
        reports = [_window_worker(t) for t in tasks]

    summary = {"windows": len(windows), "methods": {}}
    for method in methods:
        rs = [r for r in reports if r.method == method]
        summary["methods"][method] = {
            "mean_fitted_te": float(np.mean([r.fitted_te for r in rs])),
            "mean_predicted_te": float(np.mean([r.predicted_te for r in rs])),
            "max_predicted_te": float(np.max([r.predicted_te for r in rs])),
            "windows_exact_k": int(sum(r.exact_k for r in rs)),
            "windows_flagged": int(sum(not r.exact_k for r in rs)),
        }
    return reports, summary


def synthetic_panel(T: int = 1160, m: int = 500, k_true: int | None = None,
                    block: int = 10, seed: int = 0,
                    index_noise: float = 0.5, market_share: float = 0.5,
                    block_share: float = 0.4) -> PricePanel:
    """Synthetic daily price panel with market- and block-correlated
    constituents.

    Every stock loads on one shared market factor (`market_share` of
    return variance) and on its block's factor (`block_share`), with the
    remainder idiosyncratic; blocks have `block` members. The global
    correlation is what makes sparse replication genuinely unstable, as
    with real constituents. As in a capitalization index, every
    constituent carries a positive weight by default; pass `k_true` to
    restrict the index to a subset of whole blocks instead. Observation
    noise is added on top.
    """
    rng = rng_for(seed, STREAM_PANEL)
    n_blocks = m // block
    vol = 0.01
    idio_share = 1.0 - market_share - block_share
    if idio_share <= 0:
        raise ValueError("market_share + block_share must be < 1")
    market = rng.standard_normal((T, 1))
    factors = rng.standard_normal((T, n_blocks))
    idio = rng.standard_normal((T, m))
    rets = np.empty((T, m))
    for b in range(n_blocks):
        cols = slice(b * block, (b + 1) * block)
        rets[:, cols] = vol * (math.sqrt(market_share) * market
                               + math.sqrt(block_share) * factors[:, [b]]
                               + math.sqrt(idio_share) * idio[:, cols])
    p0 = rng.uniform(20.0, 180.0, m)
    prices = p0 * np.exp(np.cumsum(rets, axis=0))

    if k_true is None:
        members = np.arange(m)
    else:
        true_blocks = rng.choice(n_blocks, size=max(1, k_true // block),
                                 replace=False)
        members = np.concatenate([np.arange(b * block, (b + 1) * block)
                                  for b in sorted(true_blocks)])[:k_true]
    weights = rng.uniform(0.5, 1.5, members.size)
    weights *= 2000.0 / float(weights @ p0[members])
    index = prices[:, members] @ weights \
        + index_noise * rng.standard_normal(T)

    start = date(2014, 1, 1)
    dates = tuple((start + timedelta(days=t)).isoformat() for t in range(T))
    tickers = tuple(f"S{i:03d}" for i in range(m))
    return PricePanel(dates=dates, tickers=tickers, prices=prices,
                      index_series=index)


def write_panel_csv(panel: PricePanel, path):
    """Inverse of `load_prices` for bundling synthetic panels."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "index", *panel.tickers])
        for t in range(panel.T):
            writer.writerow([panel.dates[t], f"{panel.index_series[t]:.10g}",
                             *(f"{v:.10g}" for v in panel.prices[t])])


def write_reports_csv(reports, path):
    """One row per window x method with 10 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id", "method", "n_selected", "exact_k",
                         "lambda", "d", "gamma", "fitted_te", "predicted_te",
                         "selected"])
        for r in reports:
            writer.writerow([
                r.window_id, r.method, r.n_selected, int(r.exact_k),
                f"{r.lam:.10g}",
                "" if r.d is None else f"{r.d:.10g}",
                "" if r.gamma is None else f"{r.gamma:.10g}",
                f"{r.fitted_te:.10g}", f"{r.predicted_te:.10g}",
                " ".join(r.selected)])


def write_summary_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
