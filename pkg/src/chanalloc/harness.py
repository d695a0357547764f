"""Experiment engine: parameter sweeps, method comparisons, statistics, CSV.

Sweeps and comparisons replay the reported experiment designs: every grid
cell (or method) sees the same scenario sequence seeded base_seed + run,
so comparisons are paired. Value CSVs are byte-reproducible for a given
spec; wall-clock timings go to separate *_timing files.
"""
from __future__ import annotations

import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .auction import RcaConfig
from .connectivity import ConnectivityEvaluator, LinkModel
from .matching import Quotas
from .pipeline import Metrics, allocate, compute_metrics
from .prealloc import N_CH_MAX_DEFAULT
from .scenario import OBSTACLE_FRACTION, generate_scenario, setup_class

VALUE_METRICS = (
    "total_utility",
    "n_unpreallocated_channels",
    "n_free_tenant_slots",
    "n_starved_tenants",
)
TIMING_METRICS = ("t_prealloc", "t_bidgen", "t_solve")

# Optimal method parametrization per setup, used by default in comparisons:
# (q_t, q_ch) for the matching method and (q_bs, n_chpbs) for the relaxed
# auction.
OPTIMAL_M2MGS = {"SS": (8, 3), "MS": (6, 2), "LS": (6, 2)}
OPTIMAL_RCA = {"SS": (3, 3), "MS": (2, 5), "LS": (2, 6)}

# Setup-dependent cap on the per-BS channel consideration parameter (the
# maximum number of channels any BS of the setup may offer).
N_CHPBS_CAP = {"SS": 3, "MS": 5, "LS": 6}


@dataclass
class MethodSpec:
    """One (method, parameters) entry of an experiment."""

    name: str
    q_t: int | None = None
    q_ch: int | None = None
    q_bs: int | None = None
    n_chpbs: int | None = None
    min_channels: int = 2

    def params(self, n_ch_max: int = N_CH_MAX_DEFAULT):
        if self.name == "m2mgs":
            return Quotas(self.q_t, self.q_ch)
        if self.name == "rca":
            return RcaConfig(
                q_bs=self.q_bs,
                n_chpbs=self.n_chpbs,
                min_channels=self.min_channels,
                max_channels=n_ch_max,
                max_bs_considered=n_ch_max,
            )
        return None

    @property
    def label(self) -> str:
        return self.name.upper()

    def to_dict(self) -> dict:
        d = {"name": self.name}
        for key in ("q_t", "q_ch", "q_bs", "n_chpbs"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.name == "rca":
            d["min_channels"] = self.min_channels
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        return cls(**d)


def optimal_method_spec(name: str, setup: str, min_channels: int = 2) -> MethodSpec:
    setup = setup_class(setup).name
    if name == "m2mgs":
        q_t, q_ch = OPTIMAL_M2MGS[setup]
        return MethodSpec("m2mgs", q_t=q_t, q_ch=q_ch)
    if name == "rca":
        q_bs, n_chpbs = OPTIMAL_RCA[setup]
        return MethodSpec("rca", q_bs=q_bs, n_chpbs=n_chpbs, min_channels=min_channels)
    return MethodSpec(name)


def default_comparison_methods(setup: str) -> list[MethodSpec]:
    return [optimal_method_spec(m, setup) for m in ("r", "db", "scvb", "dbsr", "scvbsr", "m2mgs", "rca")]


@dataclass
class ExperimentSpec:
    setup: str
    methods: list[MethodSpec] = field(default_factory=list)
    n_runs: int = 200
    base_seed: int = 1
    link: LinkModel = field(default_factory=LinkModel)
    out_dir: str = "."
    timeout_s: float = 10.0
    n_ch_max: int = N_CH_MAX_DEFAULT
    obstacle_fraction: float = OBSTACLE_FRACTION
    jobs: int = 1
    prune_dominated: bool = False

    def __post_init__(self) -> None:
        self.setup = setup_class(self.setup).name
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        for m in self.methods:
            m.params(self.n_ch_max)  # eager validation

    def to_dict(self) -> dict:
        return {
            "setup": self.setup,
            "methods": [m.to_dict() for m in self.methods],
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "link": self.link.to_dict(),
            "out_dir": self.out_dir,
            "timeout_s": self.timeout_s,
            "n_ch_max": self.n_ch_max,
            "obstacle_fraction": self.obstacle_fraction,
            "jobs": self.jobs,
            "prune_dominated": self.prune_dominated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "methods" in d:
            d["methods"] = [MethodSpec.from_dict(m) for m in d["methods"]]
        if "link" in d:
            d["link"] = LinkModel.from_dict(d["link"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class SummaryStats:
    """Boxplot-style summary: median box, 1.5*IQR whiskers, listed outliers."""

    mean: float
    median: float
    q25: float
    q75: float
    whisker_low: float
    whisker_high: float
    outliers: list[float]


def summarize(samples: list[float]) -> SummaryStats:
    """Summarize one sample set; quartiles use linear interpolation (type 7)."""
    if not samples:
        raise ValueError("cannot summarize an empty sample list")
    arr = np.sort(np.asarray(samples, dtype=float))
    n = len(arr)
    mid = n // 2
    median = float(arr[mid]) if n % 2 else float(0.5 * (arr[mid - 1] + arr[mid]))
    q25, q75 = (float(q) for q in np.percentile(arr, [25.0, 75.0]))
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = [float(x) for x in arr[(arr < lo_fence) | (arr > hi_fence)]]
    return SummaryStats(
        mean=float(arr.mean()),
        median=median,
        q25=q25,
        q75=q75,
        whisker_low=float(inside[0]),
        whisker_high=float(inside[-1]),
        outliers=outliers,
    )


def paired_t_statistic(x: list[float], y: list[float]) -> float:
    """t statistic of the paired one-sided test for mean(x - y) > 0."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("paired samples must have equal length >= 2")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    sd = d.std(ddof=1)
    if sd == 0.0:
        return math.inf if d.mean() > 0 else -math.inf if d.mean() < 0 else 0.0
    return float(d.mean() / (sd / math.sqrt(len(d))))


def t_critical_one_sided(alpha: float, df: int) -> float:
    """Student-t critical value via the Cornish-Fisher expansion of the
    normal quantile; accurate to ~1e-3 for df >= 30 (our runs use df in the
    hundreds)."""
    z = statistics.NormalDist().inv_cdf(1.0 - alpha)
    g1 = (z**3 + z) / 4.0
    g2 = (5 * z**5 + 16 * z**3 + 3 * z) / 96.0
    return z + g1 / df + g2 / df**2


# ---------------------------------------------------------------------------
# Experiment execution


def default_grid(setup: str, method: str) -> dict[str, list[int]]:
    setup = setup_class(setup).name
    if method == "m2mgs":
        return {"q_t": list(range(2, 9)), "q_ch": list(range(2, 9))}
    if method == "rca":
        q_bs_hi = min(8, setup_class(setup).n_tenants)
        return {"q_bs": list(range(2, q_bs_hi + 1)), "n_chpbs": list(range(2, N_CHPBS_CAP[setup] + 1))}
    raise ValueError(f"no parameter grid for method {method!r}")


def validate_grid(setup: str, method: str, grid: dict[str, list[int]]) -> None:
    full = default_grid(setup, method)
    for axis, values in grid.items():
        if axis not in full:
            raise ValueError(f"unknown grid axis {axis!r} for {method}")
        bad = [v for v in values if v not in full[axis]]
        if bad:
            raise ValueError(f"grid values {bad} out of bounds for axis {axis!r} ({method}, {setup})")


def _metrics_for_run(
    spec: ExperimentSpec, run: int, tasks: list[tuple[str, MethodSpec]]
) -> dict[str, Metrics]:
    """Run every (label, method) task on the run's scenario, sharing one
    connectivity cache."""
    seed = spec.base_seed + run
    scenario = generate_scenario(spec.setup, seed, spec.link, spec.obstacle_fraction)
    ev = ConnectivityEvaluator(scenario, spec.link)
    out: dict[str, Metrics] = {}
    for label, method in tasks:
        result = allocate(
            scenario,
            method=method.name,
            params=method.params(spec.n_ch_max),
            seed=seed,
            n_ch_max=spec.n_ch_max,
            solver_timeout_s=spec.timeout_s,
            prune_dominated=spec.prune_dominated,
            evaluator=ev,
        )
        out[label] = compute_metrics(result)
    return out


def _worker(args) -> tuple[list[int], list[dict[str, Metrics]]]:
    spec_dict, runs, task_dicts = args
    spec = ExperimentSpec.from_dict(spec_dict)
    tasks = [(label, MethodSpec.from_dict(m)) for label, m in task_dicts]
    return runs, [_metrics_for_run(spec, r, tasks) for r in runs]


def _execute(
    spec: ExperimentSpec, tasks: list[tuple[str, MethodSpec]]
) -> dict[str, list[Metrics]]:
    """Run all tasks for every run index; results keyed by task label, in
    run order regardless of worker completion order."""
    per_run: list[dict[str, Metrics] | None] = [None] * spec.n_runs
    if spec.jobs <= 1:
        for r in range(spec.n_runs):
            per_run[r] = _metrics_for_run(spec, r, tasks)
    else:
        chunk = max(1, spec.n_runs // (spec.jobs * 8))
        batches = [list(range(i, min(i + chunk, spec.n_runs))) for i in range(0, spec.n_runs, chunk)]
        task_dicts = [(label, m.to_dict()) for label, m in tasks]
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            for runs, results in pool.map(
                _worker, [(spec.to_dict(), b, task_dicts) for b in batches]
            ):
                for r, res in zip(runs, results):
                    per_run[r] = res
    return {label: [per_run[r][label] for r in range(spec.n_runs)] for label, _ in tasks}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def _write_csv(path, lines: list[list]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in lines:
            f.write(",".join(str(c) for c in row) + "\n")


def run_sweep(
    spec: ExperimentSpec, method: str = "m2mgs", grid: dict[str, list[int]] | None = None
) -> dict[tuple[int, int], dict[str, float]]:
    """Parameter sweep for the matching or relaxed-auction method.

    Returns mean metrics per grid cell and writes one table CSV per metric
    (rows: second axis, columns: first axis, mirroring the reported table
    layout). Cells use identical scenario sequences, so they are paired.
    """
    if grid is None:
        grid = default_grid(spec.setup, method)
    validate_grid(spec.setup, method, grid)
    if method == "m2mgs":
        col_axis, row_axis = "q_t", "q_ch"
    else:
        col_axis, row_axis = "q_bs", "n_chpbs"
    cols = sorted(grid[col_axis])
    rows = sorted(grid[row_axis])

    tasks = []
    for cv in cols:
        for rv in rows:
            ms = MethodSpec(method, **{col_axis: cv, row_axis: rv})
            tasks.append((f"{cv}:{rv}", ms))
    collected = _execute(spec, tasks)

    means: dict[tuple[int, int], dict[str, float]] = {}
    for cv in cols:
        for rv in rows:
            ms = collected[f"{cv}:{rv}"]
            means[(cv, rv)] = {
                m: float(np.mean([getattr(x, m) for x in ms])) for m in VALUE_METRICS + TIMING_METRICS
            }

    for metric in VALUE_METRICS + TIMING_METRICS:
        suffix = "_timing" if metric in TIMING_METRICS else ""
        lines: list[list] = [
            ["setup", "method", "metric", "n_runs", "row_axis", "col_axis"],
            [spec.setup, method, metric, spec.n_runs, row_axis, col_axis],
            [f"{row_axis}\\{col_axis}"] + cols,
        ]
        for rv in rows:
            lines.append([rv] + [_fmt(means[(cv, rv)][metric]) for cv in cols])
        _write_csv(
            os.path.join(spec.out_dir, f"sweep_{method}_{spec.setup}_{metric}{suffix}.csv"), lines
        )
    return means


def run_comparison(spec: ExperimentSpec) -> dict[str, dict[str, list[float]]]:
    """Compare methods on paired scenarios; returns per-method metric lists.

    Writes a long-format value CSV (method, run, metric, value), a summary
    CSV per the boxplot convention, and separate *_timing files.
    """
    methods = spec.methods if spec.methods else default_comparison_methods(spec.setup)
    tasks = [(m.label, m) for m in methods]
    if len({label for label, _ in tasks}) != len(tasks):
        raise ValueError("duplicate method labels in comparison spec")
    collected = _execute(spec, tasks)

    results: dict[str, dict[str, list[float]]] = {}
    for label, _ in tasks:
        metrics_lists: dict[str, list[float]] = {}
        for metric in VALUE_METRICS + TIMING_METRICS:
            metrics_lists[metric] = [float(getattr(m, metric)) for m in collected[label]]
        metrics_lists["solver_optimal"] = [float(m.solver_optimal) for m in collected[label]]
        metrics_lists["max_bids_per_tenant"] = [
            float(m.max_bids_per_tenant) for m in collected[label]
        ]
        results[label] = metrics_lists

    base = os.path.join(spec.out_dir, f"compare_{spec.setup}")
    value_lines: list[list] = [["method", "run", "metric", "value"]]
    timing_lines: list[list] = [["method", "run", "metric", "value"]]
    for label, _ in tasks:
        for metric in VALUE_METRICS + ("max_bids_per_tenant",):
            for r, v in enumerate(results[label][metric]):
                value_lines.append([label, r, metric, _fmt(v)])
        for metric in TIMING_METRICS:
            for r, v in enumerate(results[label][metric]):
                timing_lines.append([label, r, metric, _fmt(v)])
    _write_csv(base + "_values.csv", value_lines)
    _write_csv(base + "_timing.csv", timing_lines)

    header = ["method", "metric", "mean", "median", "q25", "q75", "whisker_low", "whisker_high", "n_outliers"]
    summary_lines: list[list] = [header]
    timing_summary_lines: list[list] = [header]
    for label, _ in tasks:
        for metric in VALUE_METRICS:
            s = summarize(results[label][metric])
            summary_lines.append(
                [label, metric] + [_fmt(v) for v in (s.mean, s.median, s.q25, s.q75, s.whisker_low, s.whisker_high)] + [len(s.outliers)]
            )
        for metric in TIMING_METRICS:
            s = summarize(results[label][metric])
            timing_summary_lines.append(
                [label, metric] + [_fmt(v) for v in (s.mean, s.median, s.q25, s.q75, s.whisker_low, s.whisker_high)] + [len(s.outliers)]
            )
    _write_csv(base + "_summary.csv", summary_lines)
    _write_csv(base + "_timing_summary.csv", timing_summary_lines)
    return results
