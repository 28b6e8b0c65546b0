# sntool/config.py
"""
Experiment manifests (JSON) and environment defaults.

    {
      "problem": {"libsvm": "mushrooms"} | {"synthetic": {"n": 1000, "d": 20, "seed": 1, "margin_scale": 1.0}},
      "loss": "logistic",
      "regularizer": {"kind": "l2", "lam": null, "delta": 1.0},
      "solvers": ["san", {"name": "sag", "gamma_lmax": 1.0}],
      "seeds": [0, 1, 2],
      "stop": {"grad_tol": 1e-6, "max_passes": 50},
      "checkpoint_every": 1.0,
      "honest_accounting": false,
      "grid": {"repeats": 5, "threshold": 1e-4},
      "output_dir": "out"
    }

`lam: null` means 1/n. Without `seeds`, ten seeds starting at the seed base
are used.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .data_io import load_problem, synth_least_squares, synth_logistic
from .errors import ConfigError
from .model import LOSS_KINDS, REG_KINDS, GlmProblem, Loss, Regularizer, lmax
from .solvers import SOLVER_KINDS, SolverConfig, StopRule

logger = logging.getLogger(__name__)

DATA_DIR = os.getenv("SNTOOL_DATA_DIR", "./data")
DEFAULT_SEED_BASE = 0
DEFAULT_NUM_SEEDS = 10

# grid protocol: p as multiples of 1/n, gamma for SAN, gamma * L_max for SAG/SVRG
GRID_P_MULTIPLIERS = [0.5, 1.0, 10.0, 100.0, 1000.0]
GRID_SAN_GAMMAS = [0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3]
GRID_LMAX_MULTIPLIERS = [0.1, 0.2, 1.0 / 3.0, 0.5, 1.0, 2.0, 5.0]


@dataclass
class SolverSpec:
    name: str
    gamma: Optional[float] = None
    gamma_lmax: Optional[float] = None
    p: Optional[float] = None
    svrg_inner: Optional[int] = None

    def to_config(self, problem: GlmProblem, seed: int, honest_accounting: bool = False) -> SolverConfig:
        gamma = self.gamma
        if self.gamma_lmax is not None:
            gamma = self.gamma_lmax / lmax(problem)
        return SolverConfig(
            kind=self.name,
            gamma=gamma,
            p=self.p,
            svrg_inner=self.svrg_inner,
            seed=seed,
            honest_accounting=honest_accounting,
        )


@dataclass
class GridConfig:
    repeats: int = 5
    threshold: float = 1e-4
    max_passes: float = 50.0
    solvers: List[str] = field(default_factory=lambda: ["san", "sag", "svrg"])
    p_multipliers: List[float] = field(default_factory=lambda: list(GRID_P_MULTIPLIERS))
    san_gammas: List[float] = field(default_factory=lambda: list(GRID_SAN_GAMMAS))
    lmax_multipliers: List[float] = field(default_factory=lambda: list(GRID_LMAX_MULTIPLIERS))


@dataclass
class ExperimentConfig:
    problem: Dict[str, Any]
    loss: str = "logistic"
    reg_kind: str = "l2"
    lam: Optional[float] = None
    delta: float = 1.0
    solvers: List[SolverSpec] = field(default_factory=lambda: [SolverSpec("san")])
    seeds: List[int] = field(default_factory=lambda: list(range(DEFAULT_SEED_BASE, DEFAULT_SEED_BASE + DEFAULT_NUM_SEEDS)))
    stop: StopRule = field(default_factory=StopRule)
    checkpoint_every: float = 1.0
    honest_accounting: bool = False
    grid: GridConfig = field(default_factory=GridConfig)
    output_dir: str = "out"

    @property
    def label(self) -> str:
        if "libsvm" in self.problem:
            return os.path.basename(str(self.problem["libsvm"]))
        syn = self.problem["synthetic"]
        return f"synthetic_n{syn.get('n')}_d{syn.get('d')}_seed{syn.get('seed', 0)}"


# ---------------------------
# Parsing
# ---------------------------

def _real(value, name: str, minimum: float | None = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    value = float(value)
    if minimum is not None and (value < minimum or (strict and value == minimum)):
        bound = ">" if strict else ">="
        raise ConfigError(f"{name} must be {bound} {minimum:g}, got {value:g}")
    return value


def _integer(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _solver_spec(entry) -> SolverSpec:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"solver entry must be a name or an object with 'name': {entry!r}")
    unknown = set(entry) - {"name", "gamma", "gamma_lmax", "p", "svrg_inner"}
    if unknown:
        raise ConfigError(f"unknown solver keys {sorted(unknown)}")
    if entry["name"] not in SOLVER_KINDS:
        raise ConfigError(f"unknown solver {entry['name']!r}; expected one of {SOLVER_KINDS}")
    if entry.get("gamma") is not None and entry.get("gamma_lmax") is not None:
        raise ConfigError("give either gamma or gamma_lmax, not both")
    for key in ("gamma", "gamma_lmax", "p"):
        if entry.get(key) is not None:
            _real(entry[key], f"{entry['name']}.{key}")
    if entry.get("svrg_inner") is not None:
        _integer(entry["svrg_inner"], f"{entry['name']}.svrg_inner", minimum=1)
    return SolverSpec(**entry)


def _validate_problem(problem) -> Dict[str, Any]:
    if not isinstance(problem, dict) or len(problem) != 1:
        raise ConfigError("'problem' must be {'libsvm': path} or {'synthetic': {...}}")
    if "libsvm" in problem:
        if not isinstance(problem["libsvm"], str) or not problem["libsvm"]:
            raise ConfigError("'libsvm' must be a dataset name or path")
        return problem
    if "synthetic" in problem:
        syn = problem["synthetic"]
        if not isinstance(syn, dict) or "n" not in syn or "d" not in syn:
            raise ConfigError("synthetic problems need 'n' and 'd'")
        _integer(syn["n"], "synthetic.n", minimum=1)
        _integer(syn["d"], "synthetic.d", minimum=1)
        _integer(syn.get("seed", 0), "synthetic.seed", minimum=0)
        _real(syn.get("margin_scale", 1.0), "synthetic.margin_scale", minimum=0.0, strict=True)
        return problem
    raise ConfigError(f"unknown problem source {sorted(problem)}")


def config_from_dict(raw: Dict[str, Any], seed_base: Optional[int] = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("experiment manifest must be a JSON object")
    if "problem" not in raw:
        raise ConfigError("experiment manifest needs a 'problem'")

    loss = raw.get("loss", "logistic")
    if loss not in LOSS_KINDS:
        raise ConfigError(f"unknown loss {loss!r}")

    reg = raw.get("regularizer", {}) or {}
    reg_kind = reg.get("kind", "l2")
    if reg_kind not in REG_KINDS:
        raise ConfigError(f"unknown regularizer {reg_kind!r}")
    lam = reg.get("lam")
    if lam is not None:
        lam = _real(lam, "regularizer.lam", minimum=0.0)
    delta = _real(reg.get("delta", 1.0), "regularizer.delta", minimum=0.0, strict=True)

    solvers = [_solver_spec(s) for s in raw.get("solvers", ["san"])]
    if not solvers:
        raise ConfigError("at least one solver is required")

    base = DEFAULT_SEED_BASE if seed_base is None else seed_base
    seeds = raw.get("seeds")
    if seeds is None:
        seeds = list(range(base, base + DEFAULT_NUM_SEEDS))
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("'seeds' must be a non-empty list")
    seeds = [_integer(s, "seeds", minimum=0) for s in seeds]
    if seed_base is not None:
        seeds = [seed_base + k for k in range(len(seeds))]

    stop_raw = raw.get("stop", {}) or {}
    grid_raw = raw.get("grid", {}) or {}
    try:
        stop = StopRule(**stop_raw)
        grid = GridConfig(**grid_raw)
    except TypeError as exc:
        raise ConfigError(f"invalid stop/grid settings: {exc}") from None
    if grid.repeats < 1:
        raise ConfigError("grid repeats must be >= 1")

    checkpoint_every = _real(raw.get("checkpoint_every", 1.0), "checkpoint_every", minimum=0.0, strict=True)

    return ExperimentConfig(
        problem=_validate_problem(raw["problem"]),
        loss=loss,
        reg_kind=reg_kind,
        lam=lam,
        delta=delta,
        solvers=solvers,
        seeds=seeds,
        stop=stop,
        checkpoint_every=checkpoint_every,
        honest_accounting=bool(raw.get("honest_accounting", False)),
        grid=grid,
        output_dir=raw.get("output_dir", "out"),
    )


def load_config(path: str, seed_base: Optional[int] = None) -> ExperimentConfig:
    try:
        with open(path, "r") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw, seed_base=seed_base)


# ---------------------------
# Problem construction
# ---------------------------

def resolve_dataset_path(name: str, data_dir: Optional[str] = None) -> str:
    """A path as given if it exists, otherwise looked up under the data dir."""
    if os.path.exists(name):
        return name
    return os.path.join(data_dir or DATA_DIR, name)


def build_problem(cfg: ExperimentConfig, data_dir: Optional[str] = None) -> GlmProblem:
    loss = Loss(cfg.loss)
    if "libsvm" in cfg.problem:
        path = resolve_dataset_path(str(cfg.problem["libsvm"]), data_dir)
        return load_problem(path, loss=loss, reg_kind=cfg.reg_kind, lam=cfg.lam, delta=cfg.delta)

    syn = cfg.problem["synthetic"]
    n, d, seed = int(syn["n"]), int(syn["d"]), int(syn.get("seed", 0))
    if cfg.loss == "squared":
        problem = synth_least_squares(n, d, seed)
    else:
        problem = synth_logistic(n, d, seed, float(syn.get("margin_scale", 1.0)))
    lam = 1.0 / n if cfg.lam is None else cfg.lam
    return problem.with_reg(Regularizer(cfg.reg_kind, lam, cfg.delta))
