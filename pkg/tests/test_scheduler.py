import os

import pandas as pd
import pytest
from numpy.testing import assert_allclose

from conftest import random_logistic
from sntool.data_io import synth_logistic
from sntool.errors import ConfigError, NumericalError
from sntool.model import lmax
from sntool.reports import generate_pdf_report_bytes
from sntool.scheduler import RunJob, job_run_solver, run_jobs
from sntool.solvers import SolverConfig, StopRule


def _jobs():
    return [RunJob(SolverConfig(kind=kind, seed=seed), label=label)
            for kind, label in (("san", "san"), ("sag", "sag_default"))
            for seed in (0, 1)]


def test_run_jobs_keeps_order_and_writes_traces(tmp_path):
    problem = random_logistic(0, 40, 3)
    traces = run_jobs(problem, _jobs(), StopRule(max_passes=2), out_dir=str(tmp_path))
    assert [(t.solver, t.seed) for t in traces] == [("san", 0), ("san", 1), ("sag_default", 0), ("sag_default", 1)]
    assert sorted(os.listdir(tmp_path)) == sorted(
        f"trace_{s}_seed{k}.csv" for s in ("san", "sag_default") for k in (0, 1)
    )


def test_parallel_matches_serial():
    problem = random_logistic(1, 30, 2)
    stop = StopRule(max_passes=2)
    serial = run_jobs(problem, _jobs(), stop, n_jobs=1)
    parallel = run_jobs(problem, _jobs(), stop, n_jobs=2)
    for a, b in zip(serial, parallel):
        assert_allclose([r.grad_norm for r in a.records], [r.grad_norm for r in b.records])


def test_run_jobs_edge_cases():
    problem = random_logistic(0, 5, 2)
    assert run_jobs(problem, [], StopRule()) == []
    with pytest.raises(ConfigError):
        run_jobs(problem, _jobs(), StopRule(), n_jobs=0)


def test_pdf_report_bytes():
    df = pd.DataFrame({"solver": ["san"], "passes": [3.25]})
    pdf = generate_pdf_report_bytes("Solver runs", [("Final state", df)], meta={"n": 10, "lambda": 0.1})
    assert pdf.startswith(b"%PDF")


def test_divergent_job_is_tolerated_only_on_request():
    problem = synth_logistic(200, 5, seed=1)
    job = RunJob(SolverConfig(kind="sag", gamma=1e6 / lmax(problem), seed=0))
    with pytest.raises(NumericalError):
        job_run_solver(problem, job, StopRule(max_passes=3), 1.0)
    traces = run_jobs(problem, [job, RunJob(SolverConfig(kind="san", seed=0))], StopRule(max_passes=3),
                      tolerate_divergence=True)
    assert traces[0] is None
    assert traces[1].solver == "san"
