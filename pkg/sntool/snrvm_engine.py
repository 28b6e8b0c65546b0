# sntool/snrvm_engine.py
"""
Dense reference engine for the sketched Newton-Raphson iteration with a
variable metric:

    x' = x - gamma W^{-1} G S (S^T G^T W^{-1} G S)^+ S^T F(x),    G = grad F(x)

G is the transposed Jacobian (dim_in x dim_out). Everything is dense and
O(p^3); the engine exists to cross-check the incremental solvers and to
measure contraction rates on small linear systems.

For a GLM the function-splitting system stacks x = [w; alpha_1; ...; alpha_n]:

    F(x) = [ 1/n sum_i alpha_i ; grad f_1(w) - alpha_1 ; ... ; grad f_n(w) - alpha_n ]
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .linalg import (
    cholesky,
    inv_sqrt_spd,
    least_norm_solve,
    min_pos_eig,
    pseudo_inverse,
    weighted_sketch_project,
)
from .model import GlmProblem, grad_fi, hess_fi
from .rng import draw_index, draw_san, make_rng

logger = logging.getLogger(__name__)

SPLITTING_DENSE_CAP = 1024
PROB_SUM_TOL = 1e-12


@dataclass
class NonlinearSystem:
    """
    F: R^dim_in -> R^dim_out with grad_F(x) of shape (dim_in, dim_out).
    Linear systems F(x) = A x - b also carry `matrix` and `rhs`.
    """
    dim_in: int
    dim_out: int
    F: Callable[[np.ndarray], np.ndarray]
    grad_F: Callable[[np.ndarray], np.ndarray]
    matrix: Optional[np.ndarray] = None
    rhs: Optional[np.ndarray] = None

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.grad_F(x).T


def linear_system(A: np.ndarray, b: np.ndarray) -> NonlinearSystem:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (A.shape[0],):
        raise ConfigError(f"rhs has shape {b.shape}, expected ({A.shape[0]},)")
    return NonlinearSystem(
        dim_in=A.shape[1],
        dim_out=A.shape[0],
        F=lambda x: A @ x - b,
        grad_F=lambda x: A.T.copy(),
        matrix=A,
        rhs=b,
    )


# ---------------------------
# Function splitting
# ---------------------------

def _blk(k: int, d: int) -> slice:
    return slice(k * d, (k + 1) * d)


def build_function_splitting(problem: GlmProblem, cap: int = SPLITTING_DENSE_CAP) -> NonlinearSystem:
    """
    Stack the stationarity conditions of f one data point per block row.
    Squared loss with L2 regularization gives a linear system, which is
    recorded as such.
    """
    n, d = problem.n, problem.d
    dim = (n + 1) * d
    if dim > cap:
        raise ConfigError(f"function-splitting system has dimension {dim}, above the dense cap {cap}")

    def F(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w = x[_blk(0, d)]
        out = np.empty(dim)
        alphas = x[d:].reshape(n, d)
        out[_blk(0, d)] = alphas.mean(axis=0)
        for i in range(n):
            out[_blk(i + 1, d)] = grad_fi(problem, i, w) - alphas[i]
        return out

    def grad_F(x: np.ndarray) -> np.ndarray:
        w = np.asarray(x, dtype=float)[_blk(0, d)]
        G = np.zeros((dim, dim))
        eye = np.eye(d)
        for i in range(n):
            # column block i+1 holds the transposed Jacobian of grad f_i(w) - alpha_i
            G[_blk(0, d), _blk(i + 1, d)] = hess_fi(problem, i, w).to_dense()
            G[_blk(i + 1, d), _blk(i + 1, d)] = -eye
            G[_blk(i + 1, d), _blk(0, d)] = eye / n
        return G

    system = NonlinearSystem(dim_in=dim, dim_out=dim, F=F, grad_F=grad_F)
    if problem.loss.kind == "squared" and problem.reg.kind == "l2":
        zero = np.zeros(dim)
        system.matrix = grad_F(zero).T
        system.rhs = -F(zero)
    return system


# ---------------------------
# Sketch distributions
# ---------------------------

@dataclass
class SketchOutcome:
    prob: float
    S: np.ndarray
    W: np.ndarray


@dataclass
class SketchDistribution:
    """
    A finite distribution over (S, W) pairs. `build(x, i)` returns outcome i
    at x; `draw(rng)` samples an outcome index with the same random calls the
    matching incremental solver makes.
    """
    kind: str
    probs: np.ndarray
    build: Callable[[np.ndarray, int], Tuple[np.ndarray, np.ndarray]]
    draw: Callable[[np.random.Generator], int]
    constant_metric: bool = False

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def outcome(self, x: np.ndarray, i: int) -> SketchOutcome:
        S, W = self.build(x, i)
        return SketchOutcome(float(self.probs[i]), S, W)

    def outcomes(self, x: np.ndarray) -> List[SketchOutcome]:
        return [self.outcome(x, i) for i in range(self.size)]

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> SketchOutcome:
        return self.outcome(x, self.draw(rng))


def _block_selector(dim: int, d: int, blocks) -> np.ndarray:
    S = np.zeros((dim, d * len(blocks)))
    for col, k in enumerate(blocks):
        S[_blk(k, d), _blk(col, d)] = np.eye(d)
    return S


def _hessian_metric(problem: GlmProblem, x: np.ndarray, j: int) -> np.ndarray:
    d = problem.d
    W = np.eye(x.shape[0])
    W[_blk(0, d), _blk(0, d)] = hess_fi(problem, j, x[_blk(0, d)]).to_dense()
    return W


def san_distribution(problem: GlmProblem, p: Optional[float] = None) -> SketchDistribution:
    """
    Outcome 0 (prob p): the averaging row with W = I.
    Outcome j+1 (prob (1-p)/n): row block j+1 with W = blockdiag(Hess f_j(w), I).
    """
    n, d = problem.n, problem.d
    p = 1.0 / (n + 1) if p is None else p
    if not 0.0 < p < 1.0:
        raise ConfigError(f"averaging probability must lie in (0, 1), got {p}")
    dim = (n + 1) * d
    probs = np.concatenate([[p], np.full(n, (1.0 - p) / n)])

    def build(x, i):
        if i == 0:
            return _block_selector(dim, d, [0]), np.eye(dim)
        return _block_selector(dim, d, [i]), _hessian_metric(problem, x, i - 1)

    def draw(rng):
        j = draw_san(rng, p, n)
        return 0 if j is None else j + 1

    return SketchDistribution("san", probs, build, draw)


def sana_distribution(problem: GlmProblem) -> SketchDistribution:
    """Outcome j (prob 1/n): row blocks 0 and j+1 together, W = blockdiag(Hess f_j(w), I)."""
    n, d = problem.n, problem.d
    dim = (n + 1) * d
    probs = np.full(n, 1.0 / n)

    def build(x, j):
        return _block_selector(dim, d, [0, j + 1]), _hessian_metric(problem, x, j)

    return SketchDistribution("sana", probs, build, lambda rng: draw_index(rng, n))


def san_id_distribution(problem: GlmProblem, p: Optional[float] = None) -> SketchDistribution:
    """SAN's sketches with the Euclidean metric."""
    base = san_distribution(problem, p)
    dim = (problem.n + 1) * problem.d

    def build(x, i):
        S, _ = base.build(x, i)
        return S, np.eye(dim)

    return SketchDistribution("san_id", base.probs, build, base.draw, constant_metric=True)


def full_distribution(dim_out: int, dim_in: Optional[int] = None) -> SketchDistribution:
    """S = I and W = I with probability one."""
    dim_in = dim_out if dim_in is None else dim_in
    S, W = np.eye(dim_out), np.eye(dim_in)
    return SketchDistribution("full", np.ones(1), lambda x, i: (S, W), lambda rng: 0, constant_metric=True)


def coordinate_distribution(A: np.ndarray) -> SketchDistribution:
    """S = e_i with probability A_ii / tr(A) and W = A (A symmetric positive definite)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    cholesky(A)
    diag = np.diag(A).copy()
    probs = diag / diag.sum()
    dim = A.shape[0]
    eye = np.eye(dim)

    def build(x, i):
        return eye[:, [i]], A

    def draw(rng):
        return int(rng.choice(dim, p=probs))

    return SketchDistribution("coordinate", probs, build, draw, constant_metric=True)


def validate_distribution(dist: SketchDistribution, x: np.ndarray) -> float:
    """Check the distribution is proper; returns lambda_min(E[S S^T])."""
    if np.any(dist.probs <= 0.0):
        raise ConfigError(f"{dist.kind}: outcome probabilities must be positive")
    total = float(dist.probs.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ConfigError(f"{dist.kind}: probabilities sum to {total!r}")
    expected = sum(o.prob * o.S @ o.S.T for o in dist.outcomes(x))
    lam_min = float(scipy.linalg.eigvalsh(0.5 * (expected + expected.T))[0])
    if lam_min <= 0.0:
        raise ConfigError(f"{dist.kind}: E[S S^T] is singular")
    return lam_min


# ---------------------------
# Iteration and analysis
# ---------------------------

def snrvm_step(sys: NonlinearSystem, x: np.ndarray, S: np.ndarray, W: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """One damped sketched Newton step in the W metric."""
    x = np.asarray(x, dtype=float)
    J = sys.jacobian(x)
    return x + gamma * weighted_sketch_project(J, S, W, -sys.F(x))


def surrogate_metric(sys: NonlinearSystem, x_anchor: np.ndarray, W: np.ndarray) -> np.ndarray:
    """(G^T W^{-1} G)^+ with G = grad F(x_anchor)."""
    G = sys.grad_F(np.asarray(x_anchor, dtype=float))
    inner = G.T @ scipy.linalg.cho_solve(cholesky(W), G)
    return pseudo_inverse(0.5 * (inner + inner.T))


def surrogate_fhat(sys: NonlinearSystem, x_eval: np.ndarray, x_anchor: np.ndarray, W: np.ndarray) -> float:
    """1/2 ||F(x_eval)||^2 in the pseudo-inverse metric anchored at x_anchor."""
    r = sys.F(np.asarray(x_eval, dtype=float))
    return 0.5 * float(r @ surrogate_metric(sys, x_anchor, W) @ r)


def expected_sketch_operator(sys: NonlinearSystem, dist: SketchDistribution, x: np.ndarray) -> np.ndarray:
    """H(x) = E[S (S^T G^T W^{-1} G S)^+ S^T]."""
    G = sys.grad_F(np.asarray(x, dtype=float))
    H = np.zeros((sys.dim_out, sys.dim_out))
    for o in dist.outcomes(x):
        GS = G @ o.S
        gram = GS.T @ scipy.linalg.cho_solve(cholesky(o.W), GS)
        H += o.prob * o.S @ pseudo_inverse(0.5 * (gram + gram.T)) @ o.S.T
    return H


def rho_at(sys: NonlinearSystem, dist: SketchDistribution, x: np.ndarray) -> float:
    """min over outcomes of lambda_min^+(W_i^{-1/2} G H(x) G^T W_i^{-1/2})."""
    x = np.asarray(x, dtype=float)
    G = sys.grad_F(x)
    core = G @ expected_sketch_operator(sys, dist, x) @ G.T
    rho = np.inf
    for o in dist.outcomes(x):
        R = inv_sqrt_spd(o.W)
        rho = min(rho, min_pos_eig(R @ core @ R))
    return float(rho)


@dataclass
class ContractionResult:
    empirical_rate: float
    rho: float
    bound: float
    within_bound: bool
    mean_error: np.ndarray
    mean_surrogate: np.ndarray


def fit_geometric_rate(series: np.ndarray) -> float:
    """Per-step factor from a least-squares fit of log(series) over its positive entries."""
    series = np.asarray(series, dtype=float)
    steps = np.flatnonzero(series > 0.0)
    if steps.size < 2:
        return 0.0 if steps.size else 1.0
    slope = np.polyfit(steps.astype(float), np.log(series[steps]), 1)[0]
    return float(np.exp(slope))


def contraction_experiment(
    sys_linear: NonlinearSystem,
    dist: SketchDistribution,
    x0: np.ndarray,
    steps: int,
    trials: int,
    seed: int,
    gamma: float = 1.0,
    slack: float = 0.05,
) -> ContractionResult:
    """
    Run `trials` independent chains on a linear system with a fixed metric
    and compare the fitted decay of the mean ||x^k - x*||_W^2 with 1 - gamma rho.
    """
    if not sys_linear.is_linear:
        raise ConfigError("contraction experiments need a linear system")
    if not dist.constant_metric:
        raise ConfigError(f"{dist.kind}: contraction experiments need a constant metric")
    if steps < 1 or trials < 1:
        raise ConfigError("steps and trials must be positive")

    A, b = sys_linear.matrix, sys_linear.rhs
    x0 = np.asarray(x0, dtype=float)
    x_star = least_norm_solve(A, b)
    outcomes = dist.outcomes(x0)
    W = outcomes[0].W
    rho = rho_at(sys_linear, dist, x0)

    # x' = x - gamma P_i (A x - b) for each outcome i
    factor = cholesky(W)
    P = []
    for o in outcomes:
        SA = o.S.T @ A
        W_inv_AtS = scipy.linalg.cho_solve(factor, SA.T)
        P.append(W_inv_AtS @ pseudo_inverse(SA @ W_inv_AtS) @ o.S.T)
    P = np.stack(P)
    metric = surrogate_metric(sys_linear, x0, W)

    rng = make_rng(seed)
    X = np.tile(x0, (trials, 1))
    mean_error = np.empty(steps + 1)
    mean_surrogate = np.empty(steps + 1)

    def record(k):
        E = X - x_star
        R = X @ A.T - b
        mean_error[k] = np.einsum("ti,ij,tj->t", E, W, E).mean()
        mean_surrogate[k] = 0.5 * np.einsum("ti,ij,tj->t", R, metric, R).mean()

    record(0)
    for k in range(1, steps + 1):
        idx = rng.choice(dist.size, size=trials, p=dist.probs)
        R = X @ A.T - b
        X = X - gamma * np.einsum("tij,tj->ti", P[idx], R)
        if not np.all(np.isfinite(X)):
            raise NumericalError(f"contraction chains diverged at step {k}")
        record(k)

    rate = 1.0 if gamma == 0.0 else fit_geometric_rate(mean_error)
    bound = 1.0 - gamma * rho
    result = ContractionResult(
        empirical_rate=rate,
        rho=rho,
        bound=bound,
        within_bound=rate <= bound + slack,
        mean_error=mean_error,
        mean_surrogate=mean_surrogate,
    )
    logger.info("%s sketch: rho=%.6g empirical_rate=%.6g bound=%.6g within=%s",
                dist.kind, rho, rate, bound, result.within_bound)
    return result
