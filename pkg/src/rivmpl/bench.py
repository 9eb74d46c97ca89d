"""Benchmark CLI: build instances, run the solver, emit traces and metrics.

Configuration comes from a flat ``key = value`` text file (``#`` comments)
with command-line flags taking precedence. Each trial writes one trace CSV;
a summary JSON with per-trial metrics and their means is written once after
all trials finish. The environment variable ``RIVMPL_THREADS`` caps trial
parallelism (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import matio
from .driver import RunResult, SolverConfig, run
from .metrics import (
    elementwise_sparsity,
    infeasibility,
    kmeans,
    nmi,
    row_sparsity,
    sparsity_z,
)
from .problems import (
    gen_data_pca,
    gen_data_psd_type1,
    gen_data_ssc,
    make_group_pca,
    make_psd,
    make_ssc,
)

TRACE_COLUMNS = (
    "iter", "obj", "vnorm", "alpha", "jk", "inner_iters",
    "beta", "mu", "feas_err", "time_ms",
)

PROBLEMS = ("ssc", "gpca", "psd")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    problem: str = "gpca"
    n: int = 100
    r: int = 3
    m: int = 20
    lam: float = 2.0
    rho: float = 0.5
    classes: int = 3  # planted clusters for generated spectral data
    seed: int = 0
    trials: int = 1
    out: str = "bench_out"
    data: Optional[str] = None  # path to a user matrix; None generates data
    inner: str = "sncg"
    eps_star: float = 1e-8
    max_outer: int = 5000
    inner_budget: int = 200
    stationarity_tol: Optional[float] = None
    kmeans_restarts: int = 10
    solver_overrides: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.n < 1 or self.r < 1 or self.m < 1:
            raise ConfigError("dimensions must be positive")
        if self.lam < 0 or self.rho < 0:
            raise ConfigError("weights must be nonnegative")
        if self.inner not in ("sncg", "apg"):
            raise ConfigError(f"unknown inner solver {self.inner!r}")
        if self.data is not None and not Path(self.data).is_file():
            raise ConfigError(f"data file not found: {self.data}")
        return self

    def solver_config(self) -> SolverConfig:
        kwargs = dict(
            eps_star=self.eps_star,
            max_outer=self.max_outer,
            inner=self.inner,
            inner_budget=self.inner_budget,
            stationarity_tol=self.stationarity_tol,
        )
        kwargs.update(self.solver_overrides)
        return SolverConfig(**kwargs)


_INT_KEYS = {"n", "r", "m", "classes", "seed", "trials", "max_outer",
             "inner_budget", "kmeans_restarts"}
_FLOAT_KEYS = {"lam", "rho", "eps_star", "stationarity_tol"}


def parse_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in known or key == "solver_overrides":
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    return values


def _coerce(key: str, val: str):
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return None if val.lower() == "none" else float(val)
    if key == "data":
        return None if val.lower() == "none" else val
    return val


def build_instance(cfg: ExperimentConfig, trial_seed: int):
    """Create (problem, x0, labels) for one trial."""
    labels = None
    if cfg.problem == "ssc":
        if cfg.data is not None:
            a = matio.read_matrix(cfg.data)
        else:
            a, labels = gen_data_ssc(cfg.n, cfg.classes, trial_seed)
        problem = make_ssc(a, cfg.lam, cfg.r)
    elif cfg.problem == "gpca":
        if cfg.data is not None:
            b = matio.read_matrix(cfg.data)
        else:
            b = gen_data_pca(cfg.m, cfg.n, trial_seed)
        problem = make_group_pca(b, cfg.lam, cfg.rho, cfg.r)
    else:
        if cfg.data is not None:
            a = matio.read_matrix(cfg.data)
        else:
            a = gen_data_psd_type1(cfg.m, cfg.n, trial_seed)
        problem = make_psd(a, cfg.lam, cfg.r)
    x0 = problem.manifold.random_point(np.random.default_rng(trial_seed + 1))
    return problem, x0, labels


@dataclass
class MetricsRecord:
    objective: float
    time_s: float
    iterations: int
    nsub: float
    inner_iter_mean: float
    status: str
    stat_riem_residual: Optional[float] = None
    stat_lin_residual: Optional[float] = None
    sparsity: Optional[float] = None
    row_sparsity: Optional[float] = None
    infeasibility: Optional[float] = None
    nmi: Optional[float] = None


def compute_metrics(
    cfg: ExperimentConfig, problem, result: RunResult, labels, time_s: float
) -> MetricsRecord:
    k_outer = max(len(result.trace), 1)
    rec = MetricsRecord(
        objective=result.objective,
        time_s=time_s,
        iterations=len(result.trace),
        nsub=result.subproblems / k_outer,
        inner_iter_mean=result.inner_iterations / k_outer,
        status=result.status.value,
    )
    if result.certificate is not None:
        rec.stat_riem_residual = result.certificate.riem_residual
        rec.stat_lin_residual = result.certificate.lin_residual
    x = result.x
    if cfg.problem == "ssc":
        rec.sparsity = sparsity_z(x)
        if labels is not None:
            z = x @ x.T
            pred = kmeans(z, int(np.unique(labels).size),
                          restarts=cfg.kmeans_restarts, seed=cfg.seed)
            rec.nmi = nmi(labels, pred)
    elif cfg.problem == "gpca":
        rec.row_sparsity = row_sparsity(x)
        rec.infeasibility = infeasibility(
            x, problem.metadata["C"], problem.metadata["E"]
        )
    else:
        rec.sparsity = elementwise_sparsity(x)
    return rec


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_trace_csv(path, result: RunResult) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for row in result.trace:
        lines.append(",".join(_fmt(v) for v in (
            row.k, row.obj, row.vnorm, row.alpha, row.jk, row.inner_iters,
            row.beta, row.mu, row.feas_err, row.time_ms,
        )))
    Path(path).write_text("\n".join(lines) + "\n")


def _json_default(o):
    raise TypeError(f"not serializable: {o!r}")


def _jsonable(rec: MetricsRecord) -> dict:
    out = {}
    for key, val in asdict(rec).items():
        if isinstance(val, float):
            out[key] = float(format(val, ".17g"))
        else:
            out[key] = val
    return out


def run_trial(cfg: ExperimentConfig, index: int, clock) -> tuple[MetricsRecord, Path]:
    trial_seed = cfg.seed + index
    problem, x0, labels = build_instance(cfg, trial_seed)
    t0 = clock()
    result = run(problem, x0, cfg.solver_config(), clock=clock)
    elapsed = clock() - t0
    rec = compute_metrics(cfg, problem, result, labels, elapsed)
    trace_path = Path(cfg.out) / f"trial_{index:03d}_trace.csv"
    write_trace_csv(trace_path, result)
    return rec, trace_path


def run_experiment(cfg: ExperimentConfig, clock=time.perf_counter) -> Path:
    """Run all trials and write the aggregate summary; returns its path."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = max(1, int(os.environ.get("RIVMPL_THREADS", "1")))
    records: list[Optional[MetricsRecord]] = [None] * cfg.trials
    if workers == 1:
        for i in range(cfg.trials):
            records[i], _ = run_trial(cfg, i, clock)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(run_trial, cfg, i, clock): i for i in range(cfg.trials)
            }
            for fut, i in futures.items():
                records[i], _ = fut.result()

    means: dict = {}
    numeric = [f.name for f in fields(MetricsRecord) if f.name != "status"]
    for name in numeric:
        vals = [getattr(r, name) for r in records if getattr(r, name) is not None]
        means[name] = float(format(float(np.mean(vals)), ".17g")) if vals else None
    summary = {
        "config": {
            k: v for k, v in asdict(cfg).items() if k != "solver_overrides"
        },
        "metric_notes": {
            "infeasibility": "entrywise l1 norm of the masked coupling",
            "sparsity": "fraction of entries <= 1e-4 of the max magnitude",
        },
        "trials": [_jsonable(r) for r in records],
        "mean": means,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, default=_json_default) + "\n"
    )
    return summary_path


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rivmpl-bench",
        description="Composite manifold optimization benchmark runner",
    )
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--trials", type=int)
    p.add_argument("--inner", choices=("sncg", "apg"))
    p.add_argument("--eps-star", type=float, dest="eps_star")
    p.add_argument("--max-outer", type=int, dest="max_outer")
    p.add_argument("--data", help="path to a matrix file (binary or CSV)")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--rho", type=float)
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in ("problem", "seed", "out", "trials", "inner", "eps_star",
                "max_outer", "data", "n", "r", "m", "lam", "rho"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return ExperimentConfig(**values).validate()


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(cfg)
    except Exception as exc:  # noqa: BLE001  (CLI boundary)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
