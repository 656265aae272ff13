"""Command-line front end: fit, cv, simulate, track.

Every run writes a manifest echoing the resolved configuration and the
seed. All randomness flows from --seed through named derivation, so outputs
are byte-identical across reruns and across --jobs settings (the worker
count is an execution detail and is deliberately left out of the manifest).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .data import destandardize_coefficients, load_dataset_csv, standardize
from .errors import NoConvergenceError, SaceError
from .simlab import (
    ScenarioConfig,
    export_estimate_profile,
    run_replication,
    run_scenario,
)
from .solvers import (
    Method,
    fit_elastic_net,
    fit_gsace,
    fit_lasso,
    fit_mcp,
    fit_sace,
)
from .tracker import (
    TrackingConfig,
    load_prices,
    run_tracking,
    synthetic_panel,
    write_reports_csv,
    write_summary_json,
)
from .tuning import cross_validate, make_grid

METHOD_CHOICES = [m.value for m in Method]


def _read_config_file(path):
    """Plain key=value lines; blank lines and #-comments ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SaceError(f"{path}:{lineno}: expected key=value")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve(args, parser):
    """Flags override config-file values; fill unset flags from the file."""
    if not getattr(args, "config", None):
        return args
    file_values = _read_config_file(args.config)
    for key, val in file_values.items():
        if not hasattr(args, key):
            continue
        current = getattr(args, key)
        default = parser.get_default(key)
        if current == default:  # flag not explicitly given
            setattr(args, key, type(default)(val) if default is not None
                    else val)
    return args


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, subcommand: str, resolved: dict):
    manifest = {"subcommand": subcommand}
    manifest.update({k: v for k, v in sorted(resolved.items())
                     if k not in ("func", "config", "jobs")})
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _fit_once(d, args):
    method = Method(args.method)
    lam = args.lam
    if lam is None:
        raise SaceError("--lambda is required for fit")
    if method is Method.LASSO:
        return fit_lasso(d, lam)
    if method is Method.ELASTIC_NET:
        return fit_elastic_net(d, lam, args.lambda2)
    if method is Method.MCP:
        return fit_mcp(d, lam, args.gamma)
    if method is Method.SACE:
        return fit_sace(d, lam, args.d)
    return fit_gsace(d, lam, args.gamma, args.d)


def _write_fit_outputs(out: Path, fit, record):
    beta_raw, intercept = destandardize_coefficients(record, fit.beta)
    support = set(fit.beta.support)
    with open(out / "coefficients.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value", "selected"])
        for j, v in enumerate(beta_raw.values):
            writer.writerow([j, f"{v:.17g}", int(j in support)])
    kkt = {
        "max_violation": fit.kkt.max_violation,
        "equicorrelation_set": list(map(int, fit.kkt.equicorrelation_set)),
        "tau": [float(t) for t in fit.kkt.tau],
        "lambda": fit.spec.lam,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "objective": fit.objective,
        "intercept": intercept,
    }
    with open(out / "kkt.json", "w", encoding="utf-8") as fh:
        json.dump(kkt, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_fit(args, parser) -> int:
    out = _outdir(args)
    d, record = standardize(load_dataset_csv(args.input))
    _write_manifest(out, "fit", vars(args))
    try:
        fit = _fit_once(d, args)
    except NoConvergenceError as exc:
        _write_fit_outputs(out, exc.result, record)
        print(f"warning: {exc}", file=sys.stderr)
        return 3
    _write_fit_outputs(out, fit, record)
    print(f"fit: {len(fit.beta.support)} of {d.p} coefficients selected, "
          f"max KKT violation {fit.kkt.max_violation:.3e}")
    return 0


def cmd_cv(args, parser) -> int:
    out = _outdir(args)
    d, _ = standardize(load_dataset_csv(args.input))
    grid = make_grid(d, n_lambda=args.n_lambda,
                     lambda_min_ratio=args.lambda_min_ratio)
    _write_manifest(out, "cv", vars(args))
    cv = cross_validate(d, Method(args.method), grid, seed=args.seed,
                        lambda2=args.lambda2)
    with open(out / "cv_table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "d", "gamma", "mean_error", "std_error",
                         "failures"])
        for cell in cv.table:
            writer.writerow([
                f"{cell.lam:.10g}",
                "" if cell.d is None else f"{cell.d:.10g}",
                "" if cell.gamma is None else f"{cell.gamma:.10g}",
                f"{cell.mean_error:.10g}", f"{cell.std_error:.10g}",
                cell.failures])
    best = {"lambda": cv.best.lam, "d": cv.best.d, "gamma": cv.best.gamma,
            "mean_error": cv.best.mean_error, "folds": cv.folds}
    with open(out / "best.json", "w", encoding="utf-8") as fh:
        json.dump(best, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"cv: best lambda={cv.best.lam:.6g} d={cv.best.d} "
          f"gamma={cv.best.gamma} error={cv.best.mean_error:.6g}")
    return 0


def _table_paths(example: int, out: Path):
    if example == 1:
        return out / "table1.csv", out / "table2.csv"
    return out / "table3.csv", out / "table4.csv"


def _write_scenario_tables(out, example, case, table):
    err_path, rate_path = _table_paths(example, out)
    methods = table.methods
    with open(err_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "case", *methods])
        for thresholded, label in ((False, "l2_error"),
                                   (True, "l2_error_thresh")):
            row = [label, f"Case {case}"]
            for m in methods:
                cell = [r for r in table.rows
                        if r.method == m and r.thresholded == thresholded]
                row.append(f"{cell[0].l2_mean:.10g}" if cell else "")
            if len(row) > 2 and any(v != "" for v in row[2:]):
                writer.writerow(row)
    with open(rate_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "case", *methods])
        for thresholded, tag in ((False, ""), (True, "_thresh")):
            for metric in ("tpr", "tnr"):
                row = [f"{metric}{tag}", f"Case {case}"]
                ok = False
                for m in methods:
                    cell = [r for r in table.rows
                            if r.method == m and r.thresholded == thresholded]
                    if cell:
                        val = getattr(cell[0], f"{metric}_mean")
                        row.append(f"{val:.10g}")
                        ok = True
                    else:
                        row.append("")
                if ok:
                    writer.writerow(row)


def cmd_simulate(args, parser) -> int:
    out = _outdir(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        Method(m)
    cfg = ScenarioConfig.from_case(args.example, args.case, reps=args.reps,
                                   seed=args.seed, n=args.n, p=args.p)
    _write_manifest(out, "simulate", vars(args))
    table = run_scenario(cfg, methods, with_threshold=not args.no_threshold,
                         jobs=args.jobs, n_lambda=args.n_lambda,
                         lambda_min_ratio=args.lambda_min_ratio)
    _write_scenario_tables(out, args.example, args.case, table)

    _, fits = run_replication(cfg, 0, methods,
                              with_threshold=not args.no_threshold,
                              n_lambda=args.n_lambda,
                              lambda_min_ratio=args.lambda_min_ratio)
    rep_seed = None
    from .rng import STREAM_SIMULATE, seed_sequence
    rep_seed = seed_sequence(cfg.seed, STREAM_SIMULATE, 0)
    from .simlab import generate
    _, beta_true = generate(cfg, rep_seed)
    records = export_estimate_profile(fits, beta_true)
    with open(out / "profiles.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "coefficient", "estimate", "truth"])
        for method, j, est, truth in records:
            writer.writerow([method, j, f"{est:.17g}", f"{truth:.17g}"])

    for row in table.rows:
        tag = "thresh" if row.thresholded else "raw"
        print(f"simulate example {args.example} case {args.case} "
              f"{row.method}/{tag}: l2={row.l2_mean:.4f} "
              f"tpr={row.tpr_mean:.2f} tnr={row.tnr_mean:.2f}")
    return 0


def cmd_track(args, parser) -> int:
    out = _outdir(args)
    if args.synthetic:
        panel = synthetic_panel(T=args.panel_t, m=args.panel_m,
                                k_true=args.k, seed=args.panel_seed)
    else:
        if not args.input:
            raise SaceError("track needs --input or --synthetic")
        panel = load_prices(args.input)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        Method(m)
    cfg = TrackingConfig(k=args.k, train=args.train, test=args.test,
                         stride=args.stride, dparam=args.d, gamma=args.gamma,
                         errors_on=args.errors_on, seed=args.seed,
                         jobs=args.jobs)
    _write_manifest(out, "track", vars(args))
    reports, summary = run_tracking(panel, methods, cfg)
    write_reports_csv(reports, out / "windows.csv")
    write_summary_json(summary, out / "summary.json")
    for method, stats in summary["methods"].items():
        print(f"track {method}: mean fitted TE {stats['mean_fitted_te']:.6g}, "
              f"mean predicted TE {stats['mean_predicted_te']:.6g}, "
              f"{stats['windows_exact_k']}/{summary['windows']} windows exact")
    return 0


def _add_common(sub):
    sub.add_argument("--input", help="input CSV path")
    sub.add_argument("--method", choices=METHOD_CHOICES, default="sace")
    sub.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="penalty level")
    sub.add_argument("--d", type=float, default=None,
                     help="reversed-penalty weight in [0, 1]")
    sub.add_argument("--gamma", type=float, default=None,
                     help="concavity parameter (MCP-family methods)")
    sub.add_argument("--lambda2", type=float, default=0.5,
                     help="elastic-net ridge weight")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--config", default=None,
                     help="key=value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sace",
        description="Sparse regression with smooth adjustment for "
                    "correlated effects: fitting, cross-validation, "
                    "simulation studies, and index tracking.")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    fit = subs.add_parser("fit", help="fit one model on a CSV dataset")
    _add_common(fit)
    fit.set_defaults(func=cmd_fit)

    cv = subs.add_parser("cv", help="cross-validate hyperparameters")
    _add_common(cv)
    cv.add_argument("--n-lambda", type=int, default=30)
    cv.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    cv.set_defaults(func=cmd_cv)

    sim = subs.add_parser("simulate", help="run a synthetic scenario study")
    _add_common(sim)
    sim.add_argument("--example", type=int, choices=(1, 2), default=1)
    sim.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=1)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--n", type=int, default=50)
    sim.add_argument("--p", type=int, default=400)
    sim.add_argument("--methods", default="lasso,mcp,en,sace,gsace")
    sim.add_argument("--no-threshold", action="store_true")
    sim.add_argument("--n-lambda", type=int, default=20)
    sim.add_argument("--lambda-min-ratio", type=float, default=0.05)
    sim.set_defaults(func=cmd_simulate)

    track = subs.add_parser("track", help="rolling index-tracking study")
    _add_common(track)
    track.add_argument("--methods", default="sace,lasso")
    track.add_argument("--k", type=int, default=50)
    track.add_argument("--train", type=int, default=100)
    track.add_argument("--test", type=int, default=20)
    track.add_argument("--stride", type=int, default=None)
    track.add_argument("--errors-on", choices=("price", "returns"),
                       default="price")
    track.add_argument("--synthetic", action="store_true",
                       help="use the bundled synthetic panel generator")
    track.add_argument("--panel-t", type=int, default=1160)
    track.add_argument("--panel-m", type=int, default=500)
    track.add_argument("--panel-seed", type=int, default=0)
    track.set_defaults(func=cmd_track)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _resolve(args, parser)
    try:
        return args.func(args, parser)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (SaceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
