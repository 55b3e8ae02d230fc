"""Command-line front end.

Exit codes: 0 success, 2 acceptance-check failure (audit or plateau), 1
execution error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    compute_f_star,
    effective_dimension,
    make_designer_problem,
    sample_dataset,
    sup_norm_f_star,
)
from .estimator import fit_iterative, fit_spectral, mse, save_model
from .features import sample_feature_map
from .filters import IterativeFilter, audit_filter, make_filter
from .harness import (
    ExperimentPlan,
    default_heatmap_plan,
    default_rate_plan,
    ingest_csv_dataset,
    run_heatmap,
    run_plateau_check,
    run_rate_sweep,
    standardize_features,
    trial_seed,
    write_outputs,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


def _load_plan(args, fallback: ExperimentPlan) -> ExperimentPlan:
    if args.config:
        plan = ExperimentPlan.from_json(Path(args.config).read_text())
    else:
        plan = fallback
    if args.seed is not None:
        plan.base_seed = args.seed
    return plan


def _cmd_fit(args) -> int:
    config = json.loads(Path(args.config).read_text())
    data = config["data"]
    if "path" in data:
        X, y = ingest_csv_dataset(data["path"], **data.get("options", {}))
        if data.get("standardize", False):
            X, _ = standardize_features(X)
    else:
        problem = make_designer_problem(**data["designer"])
        X, y = sample_dataset(problem, data.get("n", 1000), args.seed or 0)
    m = config["feature_map"]
    fmap = sample_feature_map(
        m["kind"], X.shape[1], m["num_samples"], m.get("params", {}), args.seed or 0
    )
    fdesc = dict(config["filter"])
    filt = make_filter(fdesc.pop("kind"), **fdesc)
    lam = config.get("lambda")
    iterations = config.get("iterations")
    if isinstance(filt, IterativeFilter) and iterations is not None:
        model = fit_iterative(fmap, X, y, filt, iterations)
    else:
        model = fit_spectral(fmap, X, y, filt, lam=lam, iterations=iterations)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    report = {
        "train_mse": mse(model, X, y),
        "lambda": model.lam,
        "iterations": model.iterations,
        "fit_path": model.fit_path,
        "embedding_dim": fmap.embedding_dim,
    }
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    plan = _load_plan(args, default_heatmap_plan())
    result = run_heatmap(plan, workers=args.workers)
    write_outputs(args.out_dir, plan, result["rows"], {
        "aggregates": result["aggregates"],
        "failures": result["failures"],
    })
    print(f"heatmap: {len(result['rows'])} rows, {len(result['failures'])} failed cells")
    return EXIT_OK


def _cmd_rate_sweep(args) -> int:
    plan = _load_plan(args, default_rate_plan())
    result = run_rate_sweep(plan, workers=args.workers)
    summary = {k: result[k] for k in (
        "configs", "mean_excess_risk", "slope", "slope_stderr", "target_slope", "degenerate"
    )}
    write_outputs(args.out_dir, plan, result["rows"], summary)
    print(
        f"rate sweep: slope = {result['slope']:.4f} +/- {result['slope_stderr']:.4f} "
        f"(target {result['target_slope']:.4f})"
    )
    return EXIT_OK


def _cmd_plateau(args) -> int:
    plan = _load_plan(args, default_heatmap_plan())
    result = run_plateau_check(plan, workers=args.workers)
    heatmap = result.pop("heatmap")
    write_outputs(args.out_dir, plan, heatmap["rows"], {
        "plateau": result,
        "aggregates": heatmap["aggregates"],
    })
    print(f"plateau check: {'PASS' if result['pass'] else 'FAIL'}")
    return EXIT_OK if result["pass"] else EXIT_CHECK_FAILED


def _cmd_audit_filters(args) -> int:
    reports = []
    all_pass = True
    for filt in (
        make_filter("tikhonov"),
        make_filter("landweber", alpha=1.0),
        make_filter("heavyball", alpha=0.1, beta=0.9),
        make_filter("spectral_cutoff"),
    ):
        report = audit_filter(filt, q_values=(0.5, 1.0, 1.5, 2.0, 4.0))
        reports.append(json.loads(report.to_json()))
        all_pass = all_pass and report.passed
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "filter_audits.json").write_text(json.dumps(reports, indent=2) + "\n")
    for rep in reports:
        print(f"{rep['filter']}: {'PASS' if rep['pass'] else 'FAIL'}")
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def _cmd_diagnose(args) -> int:
    problem = make_designer_problem(
        J=args.rank, b=args.b, r=args.r, noise_std=0.0, seed=args.seed or 0
    )
    filt = make_filter("landweber", alpha=1.0)
    records = []
    for lam in np.logspace(-4, 0, args.grid_points):
        lam = float(lam)
        n_eff = effective_dimension(problem.eigenvalues, lam)
        _, bias = compute_f_star(problem, filt, lam)
        sup = sup_norm_f_star(problem, filt, lam, grid_size=2001)
        records.append(
            {
                "lambda": lam,
                "effective_dimension": n_eff,
                "bias": bias,
                "sup_norm": sup["value"],
                "sup_norm_bound": sup["bound"],
            }
        )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "diagnostics.json").write_text(json.dumps(records, indent=2) + "\n")
    print(f"diagnose: wrote {len(records)} records")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specrf",
        description="Spectral regularization learning with random features",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON plan/config path")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out-dir", default="specrf-out")

    for name, fn in (
        ("fit", _cmd_fit),
        ("heatmap", _cmd_heatmap),
        ("rate-sweep", _cmd_rate_sweep),
        ("plateau", _cmd_plateau),
        ("audit-filters", _cmd_audit_filters),
        ("diagnose", _cmd_diagnose),
    ):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)
        if name == "fit":
            p.set_defaults(config_required=True)
        if name == "diagnose":
            p.add_argument("--rank", type=int, default=64)
            p.add_argument("--b", type=float, default=1.0)
            p.add_argument("--r", type=float, default=0.5)
            p.add_argument("--grid-points", type=int, default=20)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "config_required", False) and not args.config:
        print("fit requires --config", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
