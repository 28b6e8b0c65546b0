# sntool/cli.py
"""
Command-line experiment runner.

    sntool run   --config exp.json [--out DIR] [--jobs N] [--seed-base S] [--describe] [--pdf]
    sntool grid  --config exp.json [--out DIR] [--jobs N] [--seed-base S] [--pdf]
    sntool rate  (--diag 1,2 | --random-spd SEED --dim D) [--sketch coordinate|full]
    sntool fetch-data [NAME ...] [--data-dir DIR]

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np
import pandas as pd

from .config import DATA_DIR, ExperimentConfig, build_problem, load_config
from .db import RunStore
from .errors import ConfigError, SntoolError
from .ingestion import DATASETS, fetch_dataset
from .model import GlmProblem, describe_problem, lmax
from .reports import write_pdf_report
from .rng import make_rng
from .scheduler import RunJob, run_jobs
from .snrvm_engine import contraction_experiment, coordinate_distribution, full_distribution, linear_system
from .solvers import NEWTON_FAMILY, SolverConfig, StopRule
from .traces import aggregate, summarize, write_csv_atomic

logger = logging.getLogger(__name__)

GRID_SENTINEL = "X"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# ---------------------------
# run
# ---------------------------

def _job_labels(cfg: ExperimentConfig) -> List[str]:
    """Solver names, suffixed with their position when a name repeats."""
    names = [s.name for s in cfg.solvers]
    return [n if names.count(n) == 1 else f"{n}{k}" for k, n in enumerate(names)]


def _load(args) -> tuple[ExperimentConfig, GlmProblem, str]:
    cfg = load_config(args.config, seed_base=args.seed_base)
    problem = build_problem(cfg, args.data_dir)
    out_dir = args.out or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    return cfg, problem, out_dir


def cmd_run(args) -> int:
    cfg, problem, out_dir = _load(args)
    if args.describe:
        logger.info("Problem %s: %s", cfg.label, describe_problem(problem))

    jobs = [
        RunJob(spec.to_config(problem, seed, cfg.honest_accounting), label=label)
        for spec, label in zip(cfg.solvers, _job_labels(cfg))
        for seed in cfg.seeds
    ]
    traces = run_jobs(problem, jobs, cfg.stop, cfg.checkpoint_every, n_jobs=args.jobs, out_dir=out_dir)

    agg = aggregate(t.to_frame() for t in traces)
    summary = summarize(traces)
    write_csv_atomic(agg, os.path.join(out_dir, "aggregate.csv"))
    write_csv_atomic(summary, os.path.join(out_dir, "summary.csv"))
    RunStore().save_runs(cfg.label, summary)

    if args.pdf:
        path = write_pdf_report(
            os.path.join(out_dir, "report.pdf"),
            f"Solver runs: {cfg.label}",
            [("Final state per run", summary)],
            meta={"n": problem.n, "d": problem.d, "lambda": problem.reg.lam, "L_max": lmax(problem)},
        )
        logger.info("PDF report written to %s", path)

    reached = int((summary["status"] == "grad_tol").sum())
    print(f"{len(traces)} run(s) finished, {reached} reached grad_tol; traces in {out_dir}")
    return 0


# ---------------------------
# grid
# ---------------------------

def grid_cells(problem: GlmProblem, cfg: ExperimentConfig, solver: str):
    """(row label, column label, SolverConfig template) for one solver's grid."""
    n = problem.n
    cells = []
    if solver in NEWTON_FAMILY and solver != "snm":
        for mult in cfg.grid.p_multipliers:
            p = mult / n
            if not 0.0 < p < 1.0:
                logger.warning("Skipping p = %g/n = %g for n=%d", mult, p, n)
                continue
            for gamma in cfg.grid.san_gammas:
                cells.append((f"p={mult:g}/n", f"gamma={gamma:g}",
                              SolverConfig(kind=solver, gamma=gamma, p=p, overrelax=True)))
    elif solver in ("sag", "svrg"):
        step = 1.0 / lmax(problem)
        for mult in cfg.grid.lmax_multipliers:
            cells.append(("", f"gamma={mult:.4g}/L_max", SolverConfig(kind=solver, gamma=mult * step)))
    else:
        raise ConfigError(f"no grid is defined for solver {solver!r}")
    return cells


def run_grid(problem: GlmProblem, cfg: ExperimentConfig, solver: str, n_jobs: int = 1) -> pd.DataFrame:
    """
    Mean effective passes to reach the grid threshold over `repeats` seeds.
    A cell where any repeat misses the threshold within max_passes, or diverges,
    is the sentinel X.
    """
    grid = cfg.grid
    stop = StopRule(grad_tol=grid.threshold, max_passes=grid.max_passes)
    cells = grid_cells(problem, cfg, solver)
    seeds = [cfg.seeds[0] + r for r in range(grid.repeats)]

    jobs = []
    for _, _, template in cells:
        for seed in seeds:
            jobs.append(RunJob(replace(template, seed=seed)))
    traces = run_jobs(problem, jobs, stop, cfg.checkpoint_every, n_jobs=n_jobs, tolerate_divergence=True)

    rows, cols = [], []
    values = {}
    for k, (row, col, _) in enumerate(cells):
        chunk = traces[k * len(seeds):(k + 1) * len(seeds)]
        passes = [None if t is None else t.passes_to_tol(grid.threshold) for t in chunk]
        if any(p is None for p in passes):
            values[(row, col)] = GRID_SENTINEL
        else:
            values[(row, col)] = round(float(np.mean(passes)), 2)
        if row not in rows:
            rows.append(row)
        if col not in cols:
            cols.append(col)

    table = pd.DataFrame(index=rows, columns=cols, dtype=object)
    for (row, col), value in values.items():
        table.loc[row, col] = value
    table.index.name = solver
    return table


def cmd_grid(args) -> int:
    cfg, problem, out_dir = _load(args)
    store = RunStore()
    sections = []
    for solver in cfg.grid.solvers:
        table = run_grid(problem, cfg, solver, n_jobs=args.jobs)
        path = os.path.join(out_dir, f"grid_{solver}.csv")
        write_csv_atomic(table.reset_index(), path)
        store.save_grid(cfg.label, solver, table)
        sections.append((f"{solver}: mean passes to ||grad f|| <= {cfg.grid.threshold:g}", table.reset_index()))
        logger.info("Grid for %s written to %s", solver, path)

    if args.pdf:
        write_pdf_report(os.path.join(out_dir, "grid_report.pdf"), f"Grid search: {cfg.label}", sections)
    print(f"grid tables for {', '.join(cfg.grid.solvers)} written to {out_dir}")
    return 0


# ---------------------------
# rate
# ---------------------------

def _parse_diag(text: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--diag expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ConfigError("--diag is empty")
    return np.diag(values)


def random_spd(seed: int, dim: int) -> np.ndarray:
    """M M^T / dim + I / 2 for a Gaussian M."""
    if dim < 1:
        raise ConfigError("--dim must be positive")
    M = make_rng(seed).standard_normal((dim, dim))
    return M @ M.T / dim + 0.5 * np.eye(dim)


def quadratic_matrix(args) -> np.ndarray:
    if args.diag is not None:
        A = _parse_diag(args.diag)
    elif args.random_spd is not None:
        A = random_spd(args.random_spd, args.dim)
    else:
        raise ConfigError("rate needs --diag or --random-spd")
    if not np.allclose(A, A.T) or np.linalg.eigvalsh(A)[0] <= 0.0:
        raise ConfigError("the quadratic matrix must be symmetric positive definite")
    return A


def cmd_rate(args) -> int:
    A = quadratic_matrix(args)
    dim = A.shape[0]
    b = A @ np.ones(dim)
    system = linear_system(A, b)
    dist = coordinate_distribution(A) if args.sketch == "coordinate" else full_distribution(dim)

    result = contraction_experiment(
        system, dist, np.zeros(dim), steps=args.steps, trials=args.trials,
        seed=args.seed, gamma=args.gamma, slack=args.slack,
    )
    report = pd.DataFrame([{
        "sketch": args.sketch,
        "dim": dim,
        "gamma": args.gamma,
        "rho": result.rho,
        "empirical_rate": result.empirical_rate,
        "bound": result.bound,
        "slack": args.slack,
        "within_bound": result.within_bound,
        "steps": args.steps,
        "trials": args.trials,
    }])
    curve = pd.DataFrame({
        "step": np.arange(args.steps + 1),
        "mean_error": result.mean_error,
        "mean_surrogate": result.mean_surrogate,
    })
    os.makedirs(args.out, exist_ok=True)
    write_csv_atomic(report, os.path.join(args.out, "rate_report.csv"))
    write_csv_atomic(curve, os.path.join(args.out, "rate_curve.csv"))

    if not result.within_bound:
        logger.warning("Empirical rate %.4g exceeds 1 - gamma*rho + slack = %.4g",
                       result.empirical_rate, result.bound + args.slack)
    print(f"rho={result.rho:.6g} empirical_rate={result.empirical_rate:.6g} "
          f"{'PASS' if result.within_bound else 'FAIL'}")
    return 0


# ---------------------------
# fetch-data
# ---------------------------

def cmd_fetch_data(args) -> int:
    for name in args.names:
        fetch_dataset(name, args.data_dir, replace=args.replace)
    print(f"{len(args.names)} dataset(s) available in {args.data_dir or DATA_DIR}")
    return 0


# ---------------------------
# Entry point
# ---------------------------

def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON experiment manifest")
    p.add_argument("--data-dir", default=None, help="dataset directory (default $SNTOOL_DATA_DIR or ./data)")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (-1 for all cores)")
    p.add_argument("--seed-base", type=int, default=None, help="first seed; overrides the manifest seeds")
    p.add_argument("--pdf", action="store_true", help="also write a PDF summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sntool", description="Stochastic Newton experiments for regularized GLMs")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run solvers and write traces")
    _add_experiment_flags(p_run)
    p_run.add_argument("--describe", action="store_true", help="log dataset metadata before running")
    p_run.set_defaults(func=cmd_run)

    p_grid = sub.add_parser("grid", help="grid search over step size and averaging probability")
    _add_experiment_flags(p_grid)
    p_grid.set_defaults(func=cmd_grid)

    p_rate = sub.add_parser("rate", help="contraction rate experiment on a quadratic")
    src = p_rate.add_mutually_exclusive_group()
    src.add_argument("--diag", default=None, help="diagonal of A, comma separated")
    src.add_argument("--random-spd", type=int, default=None, metavar="SEED", help="random SPD matrix seed")
    p_rate.add_argument("--dim", type=int, default=8)
    p_rate.add_argument("--sketch", choices=["coordinate", "full"], default="coordinate")
    p_rate.add_argument("--steps", type=int, default=20)
    p_rate.add_argument("--trials", type=int, default=2000)
    p_rate.add_argument("--seed", type=int, default=0)
    p_rate.add_argument("--gamma", type=float, default=1.0)
    p_rate.add_argument("--slack", type=float, default=0.05)
    p_rate.add_argument("--out", default="out")
    p_rate.set_defaults(func=cmd_rate)

    p_fetch = sub.add_parser("fetch-data", help="download LibSVM datasets")
    p_fetch.add_argument("names", nargs="*", default=["mushrooms", "phishing"],
                         help=f"datasets to fetch, any of: {', '.join(sorted(DATASETS))}")
    p_fetch.add_argument("--data-dir", default=None)
    p_fetch.add_argument("--replace", action="store_true")
    p_fetch.set_defaults(func=cmd_fetch_data)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.func(args)
    except SntoolError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
