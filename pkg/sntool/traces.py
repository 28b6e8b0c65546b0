# sntool/traces.py
"""
Solver traces: one record per checkpoint (effective passes, gradient norm,
objective, wall time), CSV emission and aggregation across seeds
(per-pass median with a min/max envelope).
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import pandas as pd

TRACE_COLUMNS = ["solver", "seed", "pass", "grad_norm", "fval", "wall_s"]
AGGREGATE_COLUMNS = [
    "solver", "pass", "n_seeds",
    "grad_norm_median", "grad_norm_min", "grad_norm_max",
    "fval_median", "fval_min", "fval_max",
]

STATUS_GRAD_TOL = "grad_tol"
STATUS_MAX_PASSES = "max_passes"


@dataclass
class TraceRecord:
    passes: float
    grad_norm: float
    fval: float
    wall_s: float


@dataclass
class Trace:
    solver: str
    seed: int
    records: List[TraceRecord] = field(default_factory=list)
    status: Optional[str] = None

    def record(self, passes: float, grad_norm: float, fval: float, wall_s: float) -> None:
        self.records.append(TraceRecord(passes, grad_norm, fval, wall_s))

    @property
    def last(self) -> TraceRecord:
        return self.records[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "solver": self.solver,
                    "seed": self.seed,
                    "pass": r.passes,
                    "grad_norm": r.grad_norm,
                    "fval": r.fval,
                    "wall_s": r.wall_s,
                }
                for r in self.records
            ],
            columns=TRACE_COLUMNS,
        )

    def passes_to_tol(self, tol: float) -> Optional[float]:
        """First checkpoint pass with grad_norm <= tol, or None."""
        for r in self.records:
            if r.grad_norm <= tol:
                return r.passes
        return None


def write_csv_atomic(df: pd.DataFrame, path: str) -> str:
    """Write a CSV next to its destination, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp_", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            df.to_csv(fh, index=False, float_format="%.17g")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def trace_filename(solver: str, seed: int) -> str:
    return f"trace_{solver}_seed{seed}.csv"


def aggregate(frames: Iterable[pd.DataFrame]) -> pd.DataFrame:
    """
    Per (solver, pass): number of seeds that reached the pass, and the
    median / min / max of grad_norm and fval across them.
    """
    frames = [f for f in frames if not f.empty]
    if not frames:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    df = pd.concat(frames, ignore_index=True)
    grouped = df.groupby(["solver", "pass"], sort=True)
    out = grouped.agg(
        n_seeds=("seed", "nunique"),
        grad_norm_median=("grad_norm", "median"),
        grad_norm_min=("grad_norm", "min"),
        grad_norm_max=("grad_norm", "max"),
        fval_median=("fval", "median"),
        fval_min=("fval", "min"),
        fval_max=("fval", "max"),
    ).reset_index()
    return out[AGGREGATE_COLUMNS]


def summarize(traces: Iterable[Trace]) -> pd.DataFrame:
    """One row per run with its terminal status."""
    rows = []
    for t in traces:
        last = t.last
        rows.append({
            "solver": t.solver,
            "seed": t.seed,
            "status": t.status,
            "passes": last.passes,
            "grad_norm": last.grad_norm,
            "fval": last.fval,
            "wall_s": last.wall_s,
        })
    return pd.DataFrame(rows, columns=["solver", "seed", "status", "passes", "grad_norm", "fval", "wall_s"])
