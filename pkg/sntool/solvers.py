# sntool/solvers.py
"""
Incremental solvers for regularized GLMs behind one stepping contract:

    step(state, problem, cfg) -> state      (the state is updated in place)

Newton family: SAN, SANA, SAN-id, SNM. First-order baselines: SAG, SVRG.
Every step counts the data rows it reads in `state.accesses`; effective
passes are accesses / n. Averaging steps read no data and cost nothing.

All parameters start at zero (w^0 = 0, alpha_i^0 = 0).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .linalg import cholesky, sherman_morrison_update, solve_diag_rank1, solve_spd
from .model import (
    GlmProblem,
    full_objective_and_grad,
    grad_fi,
    grad_hess_fi,
    loss_eval,
    lmax,
    reg_eval,
)
from .rng import draw_index, draw_san, make_rng
from .traces import STATUS_GRAD_TOL, STATUS_MAX_PASSES, Trace

logger = logging.getLogger(__name__)

SOLVER_KINDS = ("san", "sana", "san_id", "snm", "sag", "svrg")
NEWTON_FAMILY = ("san", "sana", "san_id", "snm")
INVARIANT_TOL = 1e-8
SNM_DENSE_CAP = 4096


@dataclass
class SolverConfig:
    """
    gamma: step size; None means 1 for the Newton family and 1/L_max for SAG/SVRG.
    p: SAN / SAN-id averaging probability; None means 1/(n+1).
    svrg_inner: SVRG inner loop length; None means n.
    overrelax: admit Newton-family step sizes in (0, 2), used by grid sweeps.
    """
    kind: str = "san"
    gamma: Optional[float] = None
    p: Optional[float] = None
    svrg_inner: Optional[int] = None
    seed: int = 0
    ridge_fast_path: bool = True
    dense_cap: int = 256
    honest_accounting: bool = False
    overrelax: bool = False

    def resolve(self, problem: GlmProblem) -> "SolverConfig":
        """Fill defaults that depend on the problem and validate."""
        if self.kind not in SOLVER_KINDS:
            raise ConfigError(f"Unknown solver kind {self.kind!r}; expected one of {SOLVER_KINDS}")
        gamma = self.gamma
        if gamma is None:
            gamma = 1.0 if self.kind in NEWTON_FAMILY else 1.0 / lmax(problem)
        p = self.p if self.p is not None else 1.0 / (problem.n + 1)
        inner = self.svrg_inner if self.svrg_inner is not None else problem.n

        if self.kind in NEWTON_FAMILY:
            if self.overrelax and not 0.0 < gamma < 2.0:
                raise ConfigError(f"{self.kind}: over-relaxed step size must lie in (0, 2), got {gamma}")
            if not self.overrelax and not 0.0 < gamma <= 1.0:
                raise ConfigError(f"{self.kind}: step size must lie in (0, 1], got {gamma}")
        elif not gamma > 0.0:
            raise ConfigError(f"{self.kind}: step size must be positive, got {gamma}")
        if not 0.0 < p < 1.0:
            raise ConfigError(f"averaging probability must lie in (0, 1), got {p}")
        if inner < 1:
            raise ConfigError(f"SVRG inner loop length must be >= 1, got {inner}")
        return SolverConfig(
            kind=self.kind,
            gamma=float(gamma),
            p=float(p),
            svrg_inner=int(inner),
            seed=self.seed,
            ridge_fast_path=self.ridge_fast_path,
            dense_cap=self.dense_cap,
            honest_accounting=self.honest_accounting,
            overrelax=self.overrelax,
        )


@dataclass
class StopRule:
    grad_tol: float = 1e-6
    max_passes: float = 50.0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ConfigError("grad_tol must be positive")
        if self.max_passes < 0:
            raise ConfigError("max_passes must be nonnegative")


@dataclass
class SolverState:
    """
    Iterate and method memory. Only the fields the method uses are set:

    - san / san_id: alphas (n x d), alpha_bar
    - sana: alphas with sum zero
    - snm: alphas (per-point copies of w), phi1 / phi2 at the copies,
      rhs_sum, and hess_inv (L2) or hess_sum (other regularizers)
    - sag: alphas holds the stored gradients, grad_sum their sum
    - svrg: snapshot_w, snapshot_grad, inner_left
    """
    w: np.ndarray
    n: int
    rng: np.random.Generator
    accesses: int = 0
    alphas: Optional[np.ndarray] = None
    alpha_bar: Optional[np.ndarray] = None
    grad_sum: Optional[np.ndarray] = None
    snapshot_w: Optional[np.ndarray] = None
    snapshot_grad: Optional[np.ndarray] = None
    inner_left: int = 0
    phi1: Optional[np.ndarray] = None
    phi2: Optional[np.ndarray] = None
    rhs_sum: Optional[np.ndarray] = None
    hess_inv: Optional[np.ndarray] = None
    hess_sum: Optional[np.ndarray] = None

    @property
    def passes(self) -> float:
        return self.accesses / self.n


def init_state(problem: GlmProblem, cfg: SolverConfig, w0: Optional[np.ndarray] = None) -> SolverState:
    """Fresh state at w0 (default zero) with zero memory; SNM copies start at w0."""
    n, d = problem.n, problem.d
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    state = SolverState(w=w, n=n, rng=make_rng(cfg.seed))
    if cfg.kind in ("san", "san_id", "sana", "sag"):
        state.alphas = np.zeros((n, d))
    if cfg.kind in ("san", "san_id"):
        state.alpha_bar = np.zeros(d)
    if cfg.kind == "sag":
        state.grad_sum = np.zeros(d)
    if cfg.kind == "snm":
        _snm_init(state, problem, cfg)
    return state


# ---------------------------
# SAN family
# ---------------------------

def _san_average(state: SolverState, gamma: float) -> None:
    # alpha_i <- alpha_i - gamma * alpha_bar, so the mean scales by (1 - gamma)
    state.alphas -= gamma * state.alpha_bar
    state.alpha_bar *= 1.0 - gamma


def _san_apply(state: SolverState, j: int, d: np.ndarray, gamma: float) -> None:
    state.w += gamma * d
    state.alphas[j] -= gamma * d
    state.alpha_bar -= (gamma / state.n) * d
    state.accesses += 1


def san_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """One SAN iteration with the structured (I + Hess f_j)^{-1} solve."""
    j = draw_san(state.rng, cfg.p, state.n)
    if j is None:
        _san_average(state, cfg.gamma)
        return state

    grad, m = grad_hess_fi(problem, j, state.w, mu=1.0)
    d = -solve_diag_rank1(m, grad - state.alphas[j])
    _san_apply(state, j, d, cfg.gamma)
    return state


def san_ridge_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """
    SAN for L2 regularization with the explicit direction

        d = phi''/(1+lam) * (lam r + phi' ||a||^2 - <a, alpha_j>) / (1 + lam + phi'' ||a||^2) * a
            - (lam w + phi' a - alpha_j) / (1 + lam),      r = <a, w>
    """
    if problem.reg.kind != "l2":
        raise ConfigError("san_ridge_step requires the L2 regularizer")
    j = draw_san(state.rng, cfg.p, state.n)
    if j is None:
        _san_average(state, cfg.gamma)
        return state

    lam = problem.reg.lam
    w = state.w
    alpha = state.alphas[j]
    idx, val = problem.row(j)
    r = float(np.dot(val, w[idx]))
    _, d1, d2 = loss_eval(problem.loss, r, problem.labels[j])
    a_sq = float(np.dot(val, val))

    coef = d2 / (1.0 + lam) * (lam * r + d1 * a_sq - np.dot(val, alpha[idx])) / (1.0 + lam + d2 * a_sq)
    d = (alpha - lam * w) / (1.0 + lam)
    d[idx] += coef * val - d1 * val / (1.0 + lam)
    _san_apply(state, j, d, cfg.gamma)
    return state


def sana_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """One SANA iteration; keeps sum_i alpha_i = 0."""
    n = state.n
    drift = np.abs(state.alphas.sum(axis=0)).max(initial=0.0)
    if drift > INVARIANT_TOL:
        raise NumericalError(f"SANA state corrupted: |sum alpha| = {drift:.3e}")

    j = draw_index(state.rng, n)
    mu = (n - 1) / n
    grad, m = grad_hess_fi(problem, j, state.w, mu=mu)
    d = -solve_diag_rank1(m, grad - state.alphas[j])

    gamma = cfg.gamma
    state.w += gamma * d
    # alpha_j moves by -gamma*mu*d, every other alpha_i by +gamma/n*d
    state.alphas += (gamma / n) * d
    state.alphas[j] -= gamma * d
    state.accesses += 1
    return state


def san_id_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """
    SAN projected in the Euclidean metric instead of the Hessian one:

        alpha_j <- alpha_j - (I + H^2)^{-1} (alpha_j - grad f_j(w))
        w       <- w - H (alpha_j' - alpha_j)
    """
    if problem.d > cfg.dense_cap:
        raise ConfigError(f"san_id forms dense d x d matrices; d={problem.d} exceeds cap {cfg.dense_cap}")
    j = draw_san(state.rng, cfg.p, state.n)
    if j is None:
        _san_average(state, cfg.gamma)
        return state

    grad, m = grad_hess_fi(problem, j, state.w)
    H = m.to_dense()
    system = np.eye(problem.d) + H @ H
    delta_alpha = -solve_spd(system, state.alphas[j] - grad)

    gamma = cfg.gamma
    state.alphas[j] += gamma * delta_alpha
    state.alpha_bar += (gamma / state.n) * delta_alpha
    state.w -= gamma * (H @ delta_alpha)
    state.accesses += 1
    return state


# ---------------------------
# SNM
# ---------------------------

def _snm_point_terms(problem: GlmProblem, i: int, x: np.ndarray):
    """phi', phi'' at <a_i, x> and the data part a_i (phi'' t - phi') of H_i x - grad f_i(x)."""
    idx, val = problem.row(i)
    t = float(np.dot(val, x[idx]))
    _, d1, d2 = loss_eval(problem.loss, t, problem.labels[i])
    return idx, val, d1, d2, d2 * t - d1


def _reg_rhs(problem: GlmProblem, x: np.ndarray):
    """lam R''(x) and the regularizer part lam (R''(x) x - R'(x))."""
    _, g, h = reg_eval(problem.reg, x)
    return h, h * x - g


def _snm_init(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> None:
    n, d = problem.n, problem.d
    if d > SNM_DENSE_CAP:
        raise ConfigError(f"snm keeps a dense d x d matrix; d={d} is too large")
    w0 = state.w
    state.alphas = np.tile(w0, (n, 1))
    state.phi1 = np.zeros(n)
    state.phi2 = np.zeros(n)
    rhs = np.zeros(d)
    data_hess = np.zeros((d, d))
    for i in range(n):
        idx, val, d1, d2, coef = _snm_point_terms(problem, i, w0)
        state.phi1[i], state.phi2[i] = d1, d2
        rhs[idx] += coef * val
        data_hess[np.ix_(idx, idx)] += d2 * np.outer(val, val)
    reg_h, reg_r = _reg_rhs(problem, w0)
    rhs += n * reg_r
    hess = data_hess
    hess[np.diag_indices(d)] += n * reg_h
    state.rhs_sum = rhs

    if problem.reg.kind == "l2":
        factor = _snm_factor(hess)
        state.hess_inv = scipy.linalg.cho_solve(factor, np.eye(d))
    else:
        state.hess_sum = hess
    if cfg.honest_accounting:
        state.accesses += n


def _snm_factor(hess: np.ndarray):
    try:
        return cholesky(hess)
    except NumericalError as exc:
        raise NumericalError(f"SNM Hessian sum is singular: {exc}") from exc


def snm_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """
    w = (sum_i H_i(alpha_i))^{-1} sum_i [H_i(alpha_i) alpha_i - grad f_i(alpha_i)],
    then alpha_j <- w for one sampled j and the sums are updated in place.
    With L2 the inverse is kept current by a Sherman-Morrison update; other
    regularizers refactor the dense sum.
    """
    if state.hess_inv is not None:
        w = state.hess_inv @ state.rhs_sum
    else:
        w = scipy.linalg.cho_solve(_snm_factor(state.hess_sum), state.rhs_sum)
    state.w = w

    j = draw_index(state.rng, state.n)
    old = state.alphas[j].copy()
    idx, val, d1, d2, coef_new = _snm_point_terms(problem, j, w)
    t_old = float(np.dot(val, old[idx]))
    coef_old = state.phi2[j] * t_old - state.phi1[j]
    state.rhs_sum[idx] += (coef_new - coef_old) * val

    delta_curv = d2 - state.phi2[j]
    if state.hess_inv is not None:
        if delta_curv != 0.0:
            a = np.zeros(problem.d)
            a[idx] = val
            state.hess_inv = sherman_morrison_update(state.hess_inv, a, delta_curv)
    else:
        reg_h_new, reg_r_new = _reg_rhs(problem, w)
        reg_h_old, reg_r_old = _reg_rhs(problem, old)
        state.rhs_sum += reg_r_new - reg_r_old
        state.hess_sum[np.diag_indices(problem.d)] += reg_h_new - reg_h_old
        state.hess_sum[np.ix_(idx, idx)] += delta_curv * np.outer(val, val)

    state.alphas[j] = w
    state.phi1[j], state.phi2[j] = d1, d2
    state.accesses += 1
    return state


# ---------------------------
# First-order baselines
# ---------------------------

def sag_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """SAG with a zero-initialized gradient table."""
    j = draw_index(state.rng, state.n)
    g_new = grad_fi(problem, j, state.w)
    state.grad_sum += g_new - state.alphas[j]
    state.alphas[j] = g_new
    state.w -= (cfg.gamma / state.n) * state.grad_sum
    state.accesses += 1
    return state


def svrg_step(state: SolverState, problem: GlmProblem, cfg: SolverConfig) -> SolverState:
    """SVRG; the snapshot is the current iterate, refreshed every svrg_inner steps."""
    if state.inner_left == 0:
        state.snapshot_w = state.w.copy()
        _, state.snapshot_grad = full_objective_and_grad(problem, state.snapshot_w)
        state.accesses += state.n
        state.inner_left = cfg.svrg_inner

    j = draw_index(state.rng, state.n)
    v = grad_fi(problem, j, state.w) - grad_fi(problem, j, state.snapshot_w) + state.snapshot_grad
    state.w -= cfg.gamma * v
    state.inner_left -= 1
    state.accesses += 2
    return state


STEPPERS: Dict[str, Callable[[SolverState, GlmProblem, SolverConfig], SolverState]] = {
    "san": san_step,
    "sana": sana_step,
    "san_id": san_id_step,
    "snm": snm_step,
    "sag": sag_step,
    "svrg": svrg_step,
}


def stepper_for(problem: GlmProblem, cfg: SolverConfig):
    if cfg.kind == "san" and cfg.ridge_fast_path and problem.reg.kind == "l2":
        return san_ridge_step
    return STEPPERS[cfg.kind]


def check_invariants(state: SolverState, kind: str, tol: float = INVARIANT_TOL) -> None:
    """Maintained averages must agree with recomputed ones."""
    if kind in ("san", "san_id"):
        drift = np.abs(state.alpha_bar - state.alphas.mean(axis=0)).max(initial=0.0)
        if drift > tol:
            raise NumericalError(f"{kind}: maintained alpha mean drifted by {drift:.3e}")
    elif kind == "sana":
        drift = np.abs(state.alphas.sum(axis=0)).max(initial=0.0)
        if drift > tol:
            raise NumericalError(f"sana: sum of alphas drifted to {drift:.3e}")
    elif kind == "sag":
        drift = np.abs(state.grad_sum - state.alphas.sum(axis=0)).max(initial=0.0)
        if drift > tol * max(1.0, np.abs(state.grad_sum).max(initial=0.0)):
            raise NumericalError(f"sag: gradient sum drifted by {drift:.3e}")


# ---------------------------
# Driver
# ---------------------------

def run(
    problem: GlmProblem,
    cfg: SolverConfig,
    stop: StopRule | None = None,
    checkpoint_every: float = 1.0,
) -> Trace:
    """
    Step the configured solver until ||grad f|| <= grad_tol or max_passes.
    The gradient norm is evaluated at the start and every `checkpoint_every`
    effective passes; those evaluations only count as data passes with
    cfg.honest_accounting.
    """
    stop = stop or StopRule()
    if checkpoint_every <= 0:
        raise ConfigError("checkpoint_every must be positive")
    cfg = cfg.resolve(problem)
    n = problem.n
    state = init_state(problem, cfg)
    step = stepper_for(problem, cfg)
    trace = Trace(solver=cfg.kind, seed=cfg.seed)

    every = max(1, int(round(checkpoint_every * n)))
    max_accesses = int(math.ceil(stop.max_passes * n))
    started = time.perf_counter()

    def checkpoint() -> float:
        f, g = full_objective_and_grad(problem, state.w)
        grad_norm = float(np.linalg.norm(g))
        if not (np.isfinite(f) and np.isfinite(grad_norm)):
            raise NumericalError(f"{cfg.kind}: non-finite iterate at pass {state.passes:.3f}")
        check_invariants(state, cfg.kind)
        trace.record(state.passes, grad_norm, f, time.perf_counter() - started)
        logger.debug("[%s seed=%d] pass=%.3f grad_norm=%.3e f=%.10g",
                     cfg.kind, cfg.seed, state.passes, grad_norm, f)
        if cfg.honest_accounting:
            state.accesses += n
        return grad_norm

    grad_norm = checkpoint()
    next_checkpoint = state.accesses + every
    while True:
        if grad_norm <= stop.grad_tol:
            trace.status = STATUS_GRAD_TOL
            break
        if state.accesses >= max_accesses:
            trace.status = STATUS_MAX_PASSES
            break
        step(state, problem, cfg)
        if state.accesses >= next_checkpoint or state.accesses >= max_accesses:
            grad_norm = checkpoint()
            while next_checkpoint <= state.accesses:
                next_checkpoint += every

    logger.info("[%s seed=%d] status=%s passes=%.3f grad_norm=%.3e",
                cfg.kind, cfg.seed, trace.status, trace.last.passes, trace.last.grad_norm)
    return trace
