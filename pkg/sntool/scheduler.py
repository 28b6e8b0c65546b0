# sntool/scheduler.py
"""
Parallel execution of independent solver runs. Each (solver, seed) job owns
its state; the problem is shared read-only.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

from joblib import Parallel, delayed

from .errors import ConfigError, NumericalError
from .model import GlmProblem
from .solvers import SolverConfig, StopRule, run
from .traces import Trace, trace_filename, write_csv_atomic

logger = logging.getLogger(__name__)


@dataclass
class RunJob:
    cfg: SolverConfig
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.cfg.kind


def job_run_solver(problem: GlmProblem, job: RunJob, stop: StopRule, checkpoint_every: float,
                   out_dir: str | None = None, tolerate_divergence: bool = False) -> Optional[Trace]:
    """
    One job: run the solver and, when out_dir is given, write its trace CSV.
    With tolerate_divergence a NumericalError is logged and the job yields None.
    """
    try:
        trace = run(problem, job.cfg, stop, checkpoint_every)
    except NumericalError as exc:
        if not tolerate_divergence:
            raise
        logger.warning("[%s seed=%d] diverged: %s", job.name, job.cfg.seed, exc)
        return None
    trace.solver = job.name
    if out_dir is not None:
        path = os.path.join(out_dir, trace_filename(trace.solver, trace.seed))
        write_csv_atomic(trace.to_frame(), path)
        logger.debug("[%s seed=%d] trace written to %s", trace.solver, trace.seed, path)
    return trace


def run_jobs(
    problem: GlmProblem,
    jobs: Sequence[RunJob],
    stop: StopRule,
    checkpoint_every: float = 1.0,
    n_jobs: int = 1,
    out_dir: str | None = None,
    tolerate_divergence: bool = False,
) -> List[Optional[Trace]]:
    """Run jobs with up to n_jobs workers; results keep the input order."""
    if n_jobs == 0:
        raise ConfigError("--jobs must be nonzero")
    if not jobs:
        return []
    logger.info("Running %d job(s) with n_jobs=%d", len(jobs), n_jobs)
    if n_jobs == 1:
        return [job_run_solver(problem, job, stop, checkpoint_every, out_dir, tolerate_divergence)
                for job in jobs]
    return Parallel(n_jobs=n_jobs)(
        delayed(job_run_solver)(problem, job, stop, checkpoint_every, out_dir, tolerate_divergence)
        for job in jobs
    )
