import json
import os

import pytest
from numpy.testing import assert_allclose

from sntool.config import (
    DEFAULT_NUM_SEEDS,
    GRID_P_MULTIPLIERS,
    build_problem,
    config_from_dict,
    load_config,
    resolve_dataset_path,
)
from sntool.errors import ConfigError
from sntool.model import lmax

SYNTHETIC = {"synthetic": {"n": 60, "d": 4, "seed": 2}}


def test_defaults():
    cfg = config_from_dict({"problem": SYNTHETIC})
    assert cfg.seeds == list(range(DEFAULT_NUM_SEEDS))
    assert [s.name for s in cfg.solvers] == ["san"]
    assert cfg.stop.grad_tol == 1e-6 and cfg.stop.max_passes == 50
    assert cfg.grid.repeats == 5 and cfg.grid.threshold == 1e-4
    assert cfg.grid.p_multipliers == GRID_P_MULTIPLIERS
    assert cfg.label == "synthetic_n60_d4_seed2"


def test_seed_base_overrides_seeds():
    assert config_from_dict({"problem": SYNTHETIC}, seed_base=5).seeds == list(range(5, 5 + DEFAULT_NUM_SEEDS))
    assert config_from_dict({"problem": SYNTHETIC, "seeds": [3, 9]}, seed_base=7).seeds == [7, 8]
    assert config_from_dict({"problem": SYNTHETIC, "seeds": [3, 9]}).seeds == [3, 9]


@pytest.mark.parametrize("raw", [
    {},
    {"problem": {"csv": "x"}},
    {"problem": {"synthetic": {"n": 5}}},
    {"problem": SYNTHETIC, "loss": "hinge"},
    {"problem": SYNTHETIC, "regularizer": {"kind": "l1"}},
    {"problem": SYNTHETIC, "regularizer": {"lam": -1.0}},
    {"problem": SYNTHETIC, "solvers": ["newton"]},
    {"problem": SYNTHETIC, "solvers": [{"name": "sag", "gamma": 0.1, "gamma_lmax": 1.0}]},
    {"problem": SYNTHETIC, "solvers": [{"name": "sag", "step": 0.1}]},
    {"problem": SYNTHETIC, "solvers": []},
    {"problem": SYNTHETIC, "seeds": []},
    {"problem": SYNTHETIC, "stop": {"tol": 1e-3}},
    {"problem": SYNTHETIC, "stop": {"grad_tol": 0.0}},
    {"problem": SYNTHETIC, "grid": {"repeats": 0}},
    {"problem": SYNTHETIC, "checkpoint_every": 0},
    {"problem": SYNTHETIC, "checkpoint_every": "x"},
    {"problem": {"synthetic": {"n": "ten", "d": 2}}},
    {"problem": {"synthetic": {"n": 10, "d": 0}}},
    {"problem": {"synthetic": {"n": 10, "d": 2, "seed": "a"}}},
    {"problem": {"synthetic": {"n": 10, "d": 2, "margin_scale": "big"}}},
    {"problem": {"libsvm": 3}},
    {"problem": SYNTHETIC, "regularizer": {"lam": "x"}},
    {"problem": SYNTHETIC, "regularizer": {"lam": True}},
    {"problem": SYNTHETIC, "regularizer": {"delta": "x"}},
    {"problem": SYNTHETIC, "regularizer": {"delta": 0}},
    {"problem": SYNTHETIC, "seeds": ["a"]},
    {"problem": SYNTHETIC, "seeds": 3},
    {"problem": SYNTHETIC, "solvers": [{"name": "sag", "gamma": "x"}]},
    {"problem": SYNTHETIC, "solvers": [{"name": "svrg", "svrg_inner": 0}]},
])
def test_invalid_manifests(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_load_fixture(fixtures_dir):
    cfg = load_config(os.path.join(fixtures_dir, "synthetic_run.json"))
    assert cfg.seeds == [1, 2]
    assert [s.name for s in cfg.solvers] == ["san", "sag"]
    assert cfg.stop.max_passes == 5


def test_build_synthetic_problem_and_step_sizes():
    cfg = config_from_dict({"problem": SYNTHETIC, "solvers": [{"name": "sag", "gamma_lmax": 0.5}]})
    problem = build_problem(cfg)
    assert (problem.n, problem.d) == (60, 4)
    assert_allclose(problem.reg.lam, 1.0 / 60)
    solver_cfg = cfg.solvers[0].to_config(problem, seed=4)
    assert solver_cfg.seed == 4
    assert_allclose(solver_cfg.gamma, 0.5 / lmax(problem))


def test_build_problem_with_explicit_regularizer():
    cfg = config_from_dict({"problem": SYNTHETIC, "loss": "squared",
                            "regularizer": {"kind": "pseudo_huber", "lam": 0.2, "delta": 0.5}})
    problem = build_problem(cfg)
    assert problem.loss.kind == "squared"
    assert (problem.reg.kind, problem.reg.lam, problem.reg.delta) == ("pseudo_huber", 0.2, 0.5)


def test_libsvm_problem_resolves_under_data_dir(fixtures_dir, tmp_path):
    assert resolve_dataset_path("tiny.libsvm", fixtures_dir) == os.path.join(fixtures_dir, "tiny.libsvm")
    cfg = config_from_dict({"problem": {"libsvm": "tiny.libsvm"}})
    assert cfg.label == "tiny.libsvm"
    problem = build_problem(cfg, fixtures_dir)
    assert (problem.n, problem.d) == (4, 3)

    manifest = tmp_path / "exp.json"
    manifest.write_text(json.dumps({"problem": {"libsvm": "tiny.libsvm"}, "seeds": [0]}))
    assert load_config(str(manifest)).seeds == [0]
