"""Experiment harness: schedules, seeded grid sweeps, CSV/JSON emission.

Trial seeds derive from (base_seed, n-index, M-index, T-index, rep-index)
through a splitmix64 chain, so results are reproducible under grid
reordering and any worker count.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .diagnostics import DesignerProblem, excess_risk_exact, make_designer_problem, sample_dataset
from .estimator import fit_iterative, fit_spectral, mse
from .features import sample_feature_map
from .filters import IterativeFilter, make_filter

RESULTS_HEADER = ("n", "M", "T", "lambda", "rep", "metric", "value")
SCHEDULE_DELTA_DEFAULT = 2.0 / math.e  # log(2/delta) = 1
MIN_PLATEAU_REPS = 10

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def trial_seed(base_seed: int, *indices: int) -> int:
    s = splitmix64(base_seed & _MASK)
    for idx in indices:
        s = splitmix64(s ^ ((idx + 1) & _MASK))
    return s


# ---------------------------------------------------------------------------
# Rate-matched schedules


def _check_regime(n: int, r: float, b: float) -> None:
    if 2.0 * r + b <= 1.0:
        raise ValueError(f"2r + b = {2 * r + b:.3g} <= 1: hard-learning regime")
    n0 = math.ceil(math.exp((2.0 * r + b) / (2.0 * r + b - 1.0)))
    if n < n0:
        raise ValueError(f"n = {n} below the schedule threshold n0 = {n0}")


def lambda_schedule(
    n: int,
    r: float,
    b: float,
    delta: float = SCHEDULE_DELTA_DEFAULT,
    C_lambda: float = 1.0,
) -> float:
    """lambda = min(1, C * n^(-1/(2r+b)) * log^3(2/delta))."""
    _check_regime(n, r, b)
    if not 0.0 < delta < 2.0:
        raise ValueError("delta must lie in (0, 2)")
    return min(1.0, C_lambda * n ** (-1.0 / (2.0 * r + b)) * math.log(2.0 / delta) ** 3)


def m_schedule_exponent(r: float, b: float) -> float:
    if r < 0.5:
        return 1.0 / (2.0 * r + b)
    if r <= 1.0:
        return (1.0 + b * (2.0 * r - 1.0)) / (2.0 * r + b)
    return 2.0 * r / (2.0 * r + b)


def m_schedule(n: int, r: float, b: float, C_M: float = 4.0) -> int:
    """Feature-count schedule M = ceil(C_M * log(n) * n^e), regime-dependent e."""
    _check_regime(n, r, b)
    return math.ceil(C_M * math.log(n) * n ** m_schedule_exponent(r, b))


# ---------------------------------------------------------------------------
# Dataset ingestion


def ingest_csv_dataset(
    path: str,
    label_col: int = 0,
    delimiter: str = ",",
    has_header: bool = False,
    max_rows: int | None = None,
    feature_cols: list[int] | None = None,
    standardize: bool = False,
    expected_dim: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Parse a numeric CSV into (X, y); label column defaults to the first."""
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, record in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(cell.strip() == "" for cell in record):
                continue
            try:
                rows.append([float(cell) for cell in record])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
            if max_rows is not None and len(rows) >= max_rows:
                break
    if not rows:
        raise ValueError(f"{path}: no data rows")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: inconsistent column counts {sorted(widths)}")
    data = np.asarray(rows, dtype=float)
    width = data.shape[1]
    if not -width <= label_col < width:
        raise ValueError(f"label column {label_col} out of range for width {width}")
    y = data[:, label_col]
    X = np.delete(data, label_col % width, axis=1)
    if feature_cols is not None:
        X = X[:, feature_cols]
    if expected_dim is not None and X.shape[1] != expected_dim:
        warnings.warn(
            f"{path}: got {X.shape[1]} feature columns, expected {expected_dim}; "
            "select columns explicitly via feature_cols",
            stacklevel=2,
        )
    if standardize:
        X, _ = standardize_features(X)
    return X, y


def standardize_features(
    X_train: np.ndarray, X_other: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Zero-mean unit-variance scaling with training-split statistics only."""
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    out = (X_train - mean) / std
    return out, None if X_other is None else (X_other - mean) / std


# ---------------------------------------------------------------------------
# Plans


@dataclass
class ExperimentPlan:
    experiment: str  # heatmap | rate_sweep | plateau_check
    base_seed: int = 0
    repetitions: int = 20
    n_train: int = 5000
    n_test: int = 5000
    m_grid: list[int] = field(default_factory=list)
    t_grid: list[int] = field(default_factory=list)
    n_grid: list[int] = field(default_factory=list)
    problem: dict = field(default_factory=lambda: {"type": "synthetic", "input_dim": 1, "noise_std": 0.3})
    feature_map: dict = field(default_factory=lambda: {"kind": "gaussian_rff", "params": {"bandwidth": 1.0}})
    filter: dict = field(default_factory=lambda: {"kind": "landweber", "alpha": 0.5})
    schedule: dict = field(default_factory=dict)
    plateau_tol: float = 0.05

    def __post_init__(self):
        if self.experiment not in ("heatmap", "rate_sweep", "plateau_check"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        sched = {
            "C_lambda": 1.0,
            "C_M": 4.0,
            "r": 0.5,
            "b": 1.0,
            "delta": SCHEDULE_DELTA_DEFAULT,
        }
        sched.update(self.schedule)
        self.schedule = sched

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "ExperimentPlan":
        return ExperimentPlan(**json.loads(text))


def default_heatmap_plan(n: int = 5000, repetitions: int = 20, base_seed: int = 0) -> ExperimentPlan:
    """Synthetic d=1 plan mirroring the gradient-descent heatmap experiment."""
    root = math.sqrt(n)
    anchors = [round(4 * root), round(20 * root)]
    return ExperimentPlan(
        experiment="heatmap",
        base_seed=base_seed,
        repetitions=repetitions,
        n_train=n,
        n_test=n,
        m_grid=anchors,
        t_grid=[1, 4, 16, 64, 256],
    )


def plateau_anchors(n: int, input_dim: int) -> tuple[int, int]:
    root = math.sqrt(n) * input_dim
    return round(4 * root), round(20 * root)


def default_rate_plan(repetitions: int = 20, base_seed: int = 0) -> ExperimentPlan:
    return ExperimentPlan(
        experiment="rate_sweep",
        base_seed=base_seed,
        repetitions=repetitions,
        n_grid=[512, 1024, 2048, 4096, 8192, 16384],
        problem={"type": "designer", "J": 512, "b": 1.0, "r": 0.5, "R": 1.0, "noise_std": 0.5},
        filter={"kind": "tikhonov"},
    )


# ---------------------------------------------------------------------------
# Synthetic data


def _synthetic_target(X: np.ndarray) -> np.ndarray:
    # smooth cosine mixture of a fixed 1-d projection; coefficients decay
    d = X.shape[1]
    s = X @ (np.ones(d) / math.sqrt(d))
    j = np.arange(1, 7, dtype=float)
    return np.cos(np.outer(s, j - 1.0)) @ (j**-1.5)


def _synthetic_data(plan: ExperimentPlan, seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    d = int(plan.problem.get("input_dim", 1))
    X = rng.standard_normal((n, d))
    y = _synthetic_target(X)
    noise = float(plan.problem.get("noise_std", 0.3))
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    return X, y


def _load_plan_dataset(plan: ExperimentPlan) -> tuple[np.ndarray, np.ndarray]:
    opts = dict(plan.problem)
    opts.pop("type")
    path = opts.pop("path")
    return ingest_csv_dataset(path, **opts)


def _heatmap_trial_data(plan: ExperimentPlan, rep_seed: int, dataset):
    if plan.problem["type"] == "synthetic":
        X_tr, y_tr = _synthetic_data(plan, trial_seed(rep_seed, 0), plan.n_train)
        X_te, y_te = _synthetic_data(plan, trial_seed(rep_seed, 1), plan.n_test)
        return X_tr, y_tr, X_te, y_te
    X, y = dataset
    need = plan.n_train + plan.n_test
    if X.shape[0] < need:
        raise ValueError(f"dataset has {X.shape[0]} rows, plan needs {need}")
    # fixed shuffle from the base seed: all reps share the split
    perm = np.random.default_rng(trial_seed(plan.base_seed, 0xD5)).permutation(X.shape[0])
    tr, te = perm[: plan.n_train], perm[plan.n_train : need]
    X_tr, X_te = standardize_features(X[tr], X[te])
    return X_tr, y[tr], X_te, y[te]


# ---------------------------------------------------------------------------
# Runners


def _run_trials(jobs: dict, worker_count: int) -> dict:
    if worker_count <= 1:
        return {key: fn() for key, fn in jobs.items()}
    with ThreadPoolExecutor(max_workers=worker_count) as pool:
        futures = {key: pool.submit(fn) for key, fn in jobs.items()}
        return {key: fut.result() for key, fut in futures.items()}


def run_heatmap(plan: ExperimentPlan, workers: int = 1) -> dict:
    """Grid over (M, T): per cell, `repetitions` fits with fresh feature
    seeds; returns per-trial rows plus mean/std aggregates."""
    if plan.experiment not in ("heatmap", "plateau_check"):
        raise ValueError("plan.experiment must be heatmap or plateau_check")
    if not plan.m_grid or not plan.t_grid:
        raise ValueError("m_grid and t_grid must be nonempty")
    fdesc = dict(plan.filter)
    filt = make_filter(fdesc.pop("kind"), **fdesc)
    if not isinstance(filt, IterativeFilter):
        raise ValueError("heatmap requires an iterative filter")
    t_grid = sorted(set(int(t) for t in plan.t_grid))
    dataset = _load_plan_dataset(plan) if plan.problem["type"] == "dataset" else None

    def trial(mi: int, rep: int):
        m = plan.m_grid[mi]
        seed = trial_seed(plan.base_seed, 0, mi, 0, rep)
        fmap = sample_feature_map(
            plan.feature_map["kind"],
            int(plan.problem.get("input_dim", 1)),
            m,
            plan.feature_map.get("params", {}),
            trial_seed(seed, 2),
        )
        X_tr, y_tr, X_te, y_te = _heatmap_trial_data(plan, seed, dataset)
        try:
            model = fit_iterative(
                fmap, X_tr, y_tr, filt, iterations=max(t_grid), snapshots=tuple(t_grid)
            )
        except Exception as exc:  # cell marked failed, run continues
            return [(m, t, None, repr(exc)) for t in t_grid]
        return [
            (m, t, mse(model, X_te, y_te, theta=model.snapshots[t]), None)
            for t in t_grid
        ]

    jobs = {
        (mi, rep): (lambda mi=mi, rep=rep: trial(mi, rep))
        for mi in range(len(plan.m_grid))
        for rep in range(plan.repetitions)
    }
    outcomes = _run_trials(jobs, workers)

    rows, failures = [], []
    for (mi, rep) in sorted(outcomes):
        for m, t, value, err in outcomes[(mi, rep)]:
            if err is not None:
                failures.append({"M": m, "T": t, "rep": rep, "error": err})
                continue
            rows.append(
                (plan.n_train, m, t, filt.lambda_for_iterations(t), rep, "test_mse", value)
            )
    cells = {}
    for n, m, t, lam, rep, _, value in rows:
        cells.setdefault((m, t), []).append(value)
    aggregates = [
        {
            "M": m,
            "T": t,
            "mean_test_mse": float(np.mean(vals)),
            "std_test_mse": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
            "reps": len(vals),
        }
        for (m, t), vals in sorted(cells.items())
    ]
    return {"rows": rows, "aggregates": aggregates, "failures": failures}


def run_plateau_check(plan: ExperimentPlan, heatmap: dict | None = None, workers: int = 1) -> dict:
    """PASS iff best-over-T error at M = 4 sqrt(n) d stays within
    (1 + tol) of the error at M = 20 sqrt(n) d."""
    d = int(plan.problem.get("input_dim", 1))
    m_small, m_big = plateau_anchors(plan.n_train, d)
    if m_small not in plan.m_grid or m_big not in plan.m_grid:
        raise ValueError(
            f"anchors not in grid: need M = {m_small} and M = {m_big} in m_grid"
        )
    if plan.repetitions < MIN_PLATEAU_REPS:
        raise ValueError(
            f"refusing to judge plateau with < {MIN_PLATEAU_REPS} repetitions"
        )
    if heatmap is None:
        heatmap = run_heatmap(plan, workers=workers)
    best = {}
    for cell in heatmap["aggregates"]:
        m = cell["M"]
        if m not in best or cell["mean_test_mse"] < best[m]["mean_test_mse"]:
            best[m] = cell
    err_small, err_big = best[m_small], best[m_big]
    passed = err_small["mean_test_mse"] <= (1.0 + plan.plateau_tol) * err_big["mean_test_mse"]
    return {
        "pass": bool(passed),
        "tol": plan.plateau_tol,
        "anchor_small": err_small,
        "anchor_big": err_big,
        "heatmap": heatmap,
    }


def _problem_from_plan(plan: ExperimentPlan) -> DesignerProblem:
    conf = dict(plan.problem)
    if conf.pop("type") != "designer":
        raise ValueError("rate sweep needs a designer problem")
    return make_designer_problem(
        J=int(conf.get("J", 512)),
        b=float(conf.get("b", plan.schedule["b"])),
        r=float(conf.get("r", plan.schedule["r"])),
        R=float(conf.get("R", 1.0)),
        noise_std=float(conf.get("noise_std", 0.5)),
        seed=plan.base_seed,
        eigenvalue_scale=float(conf.get("eigenvalue_scale", 1.0)),
    )


def ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of y on x and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - (y.mean() + slope * xc)
    dof = max(x.size - 2, 1)
    se = float(np.sqrt(resid @ resid / dof / (xc @ xc)))
    return slope, se


def run_rate_sweep(plan: ExperimentPlan, workers: int = 1) -> dict:
    """Exact designer excess risk along the (lambda, M) schedules; fits the
    log-log rate slope over the n grid."""
    if plan.experiment != "rate_sweep":
        raise ValueError("plan.experiment must be rate_sweep")
    if len(plan.n_grid) < 5:
        raise ValueError("rate sweep needs an n-grid with at least 5 points")
    sched = plan.schedule
    r, b = sched["r"], sched["b"]
    problem = _problem_from_plan(plan)
    fdesc = dict(plan.filter)
    filt = make_filter(fdesc.pop("kind"), **fdesc)
    configs = []
    for n in plan.n_grid:
        lam = lambda_schedule(n, r, b, sched["delta"], sched["C_lambda"])
        m = m_schedule(n, r, b, sched["C_M"])
        configs.append((int(n), lam, min(m, problem.rank), m))

    def trial(ni: int, rep: int):
        n, lam, m_used, _ = configs[ni]
        fmap = problem.truncated_map(m_used)
        X, y = sample_dataset(problem, n, trial_seed(plan.base_seed, ni, 0, 0, rep))
        if isinstance(filt, IterativeFilter):
            model = fit_iterative(fmap, X, y, filt, filt.iterations_for_lambda(lam))
        else:
            model = fit_spectral(fmap, X, y, filt, lam=lam)
        return excess_risk_exact(problem, model)["total"]

    jobs = {
        (ni, rep): (lambda ni=ni, rep=rep: trial(ni, rep))
        for ni in range(len(plan.n_grid))
        for rep in range(plan.repetitions)
    }
    outcomes = _run_trials(jobs, workers)

    rows = []
    means = []
    for ni, (n, lam, m_used, m_sched) in enumerate(configs):
        vals = [outcomes[(ni, rep)] for rep in range(plan.repetitions)]
        rows.extend(
            (n, m_used, 0, lam, rep, "excess_risk", v) for rep, v in enumerate(vals)
        )
        means.append(float(np.mean(vals)))
    degenerate = any(m < 1e-12 for m in means)
    slope, se = (math.nan, math.nan)
    if not degenerate:
        slope, se = ols_slope(np.log(np.asarray(plan.n_grid, float)), np.log(means))
    return {
        "rows": rows,
        "configs": [
            {"n": n, "lambda": lam, "M": m_used, "M_schedule": m_sched}
            for n, lam, m_used, m_sched in configs
        ],
        "mean_excess_risk": means,
        "slope": slope,
        "slope_stderr": se,
        "target_slope": -r / (2.0 * r + b),
        "degenerate": degenerate,
    }


# ---------------------------------------------------------------------------
# Output files


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_results_csv(path: str | Path, rows) -> None:
    lines = [",".join(RESULTS_HEADER)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(out_dir: str | Path, plan: ExperimentPlan, rows, summary: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(out / "results.csv", rows)
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    (out / "plan.resolved.json").write_text(plan.to_json() + "\n")
