import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from conftest import make_problem, random_logistic
from sntool.cli import random_spd
from sntool.data_io import synth_least_squares
from sntool.errors import ConfigError
from sntool.model import full_hessian, full_objective_and_grad, grad_fi
from sntool.rng import make_rng
from sntool.snrvm_engine import (
    build_function_splitting,
    contraction_experiment,
    coordinate_distribution,
    fit_geometric_rate,
    full_distribution,
    linear_system,
    rho_at,
    san_distribution,
    san_id_distribution,
    sana_distribution,
    snrvm_step,
    surrogate_fhat,
    validate_distribution,
)
from sntool.solvers import SolverConfig, init_state, san_id_step, san_step, sana_step


def stacked(state):
    return np.concatenate([state.w, state.alphas.ravel()])


# ---------------------------
# Function splitting
# ---------------------------

def test_splitting_single_quadratic_term():
    problem = make_problem([[1.0]], [0.0], loss="squared", lam=0.0)
    system = build_function_splitting(problem)
    x = np.array([2.0, 1.0])
    assert_allclose(system.F(x), [1.0, 1.0])
    assert_allclose(system.grad_F(x), [[0.0, 1.0], [1.0, -1.0]])


def test_splitting_vanishes_on_solution_set():
    problem = random_logistic(0, 5, 2, lam=0.3)
    w = np.zeros(2)
    for _ in range(30):
        _, grad = full_objective_and_grad(problem, w)
        w -= np.linalg.solve(full_hessian(problem, w), grad)
    grads = np.array([grad_fi(problem, i, w) for i in range(problem.n)])
    alphas = grads - grads.mean(axis=0)
    F = build_function_splitting(problem).F(np.concatenate([w, alphas.ravel()]))
    assert np.abs(F).max() < 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_splitting_jacobian_matches_finite_differences(seed):
    problem = random_logistic(seed, 3, 3, reg="pseudo_huber", lam=0.2)
    system = build_function_splitting(problem)
    x = np.random.default_rng(seed).standard_normal(system.dim_in)
    h = 1e-6
    J = np.empty((system.dim_out, system.dim_in))
    for k in range(system.dim_in):
        e = np.zeros(system.dim_in)
        e[k] = h
        J[:, k] = (system.F(x + e) - system.F(x - e)) / (2 * h)
    assert np.abs(system.jacobian(x) - J).max() <= 1e-6


def test_splitting_dense_cap():
    with pytest.raises(ConfigError):
        build_function_splitting(random_logistic(0, 100, 20))


def test_least_squares_splitting_is_linear():
    problem = synth_least_squares(4, 2, seed=1, lam=0.1)
    system = build_function_splitting(problem)
    assert system.is_linear
    x = np.random.default_rng(2).standard_normal(system.dim_in)
    assert_allclose(system.matrix @ x - system.rhs, system.F(x), atol=1e-12)


# ---------------------------
# Steps and surrogate
# ---------------------------

def test_full_sketch_is_newton_on_linear_system():
    system = linear_system(np.diag([1.0, 2.0]), np.array([1.0, 2.0]))
    x = snrvm_step(system, np.zeros(2), np.eye(2), np.eye(2), gamma=1.0)
    assert_allclose(x, [1.0, 1.0])


def test_empty_sketch_leaves_iterate():
    system = linear_system(np.diag([1.0, 2.0]), np.array([1.0, 2.0]))
    x0 = np.array([0.3, -0.4])
    assert_allclose(snrvm_step(system, x0, np.zeros((2, 1)), np.eye(2)), x0)


def test_unit_step_solves_sketched_newton_system():
    problem = random_logistic(3, 4, 2)
    system = build_function_splitting(problem)
    dist = san_distribution(problem)
    x = np.random.default_rng(3).standard_normal(system.dim_in)
    o = dist.outcome(x, 2)
    x_new = snrvm_step(system, x, o.S, o.W)
    G = system.grad_F(x)
    assert_allclose(o.S.T @ (G.T @ (x_new - x) + system.F(x)), 0.0, atol=1e-10)
    # the move lies in range(W^{-1} G S)
    basis = np.linalg.solve(o.W, G @ o.S)
    coef, *_ = np.linalg.lstsq(basis, x_new - x, rcond=None)
    assert_allclose(basis @ coef, x_new - x, atol=1e-9)


def test_surrogate_examples():
    identity = linear_system(np.eye(2), np.zeros(2))
    assert_allclose(surrogate_fhat(identity, np.array([3.0, 4.0]), np.zeros(2), np.eye(2)), 12.5)
    shifted = linear_system(np.eye(2), np.array([1.0, 1.0]))
    assert_allclose(surrogate_fhat(shifted, np.ones(2), np.zeros(2), np.eye(2)), 0.0, atol=1e-15)
    scaled = linear_system(np.diag([1.0, 2.0]), np.zeros(2))
    assert_allclose(surrogate_fhat(scaled, np.ones(2), np.zeros(2), np.diag([4.0, 1.0])), 2.5)


# ---------------------------
# Oracle equivalence with the incremental solvers
# ---------------------------

def _replay(kind, dist_factory, step, seed, steps=200):
    rng = np.random.default_rng(100 + seed)
    n, d = int(rng.integers(2, 11)), int(rng.integers(1, 9))
    problem = random_logistic(seed, n, d, density=0.7)
    cfg = SolverConfig(kind=kind, seed=seed).resolve(problem)
    state = init_state(problem, cfg)
    system = build_function_splitting(problem)
    dist = dist_factory(problem, cfg)
    engine_rng = make_rng(seed)
    x = np.zeros(system.dim_in)
    for _ in range(steps):
        o = dist.sample(x, engine_rng)
        x = snrvm_step(system, x, o.S, o.W, cfg.gamma)
        step(state, problem, cfg)
        assert_allclose(stacked(state), x, rtol=1e-8, atol=1e-10)
    return state


@pytest.mark.parametrize("seed", range(20))
def test_san_matches_engine(seed):
    _replay("san", lambda pr, cfg: san_distribution(pr, cfg.p), san_step, seed)


@pytest.mark.parametrize("seed", range(20))
def test_sana_matches_engine(seed):
    state = _replay("sana", lambda pr, cfg: sana_distribution(pr), sana_step, seed)
    assert np.abs(state.alphas.sum(axis=0)).max() <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_san_id_matches_engine(seed):
    _replay("san_id", lambda pr, cfg: san_id_distribution(pr, cfg.p), san_id_step, seed, steps=100)


# ---------------------------
# Distributions and rates
# ---------------------------

def test_distributions_are_proper():
    problem = random_logistic(4, 5, 2)
    x = np.zeros((problem.n + 1) * problem.d)
    for dist in (san_distribution(problem), sana_distribution(problem), san_id_distribution(problem)):
        assert abs(dist.probs.sum() - 1.0) <= 1e-12
        assert validate_distribution(dist, x) > 0.0
    assert validate_distribution(coordinate_distribution(np.diag([1.0, 2.0])), np.zeros(2)) > 0.0
    assert validate_distribution(full_distribution(3), np.zeros(3)) == pytest.approx(1.0)


def test_coordinate_rho_is_min_over_trace():
    A = np.diag([1.0, 2.0])
    assert_allclose(rho_at(linear_system(A, np.zeros(2)), coordinate_distribution(A), np.zeros(2)), 1.0 / 3.0)
    I5 = np.eye(5)
    assert_allclose(rho_at(linear_system(I5, np.zeros(5)), coordinate_distribution(I5), np.zeros(5)), 0.2)


def test_full_sketch_rho_is_one():
    A = np.random.default_rng(5).standard_normal((4, 4)) + 3 * np.eye(4)
    assert_allclose(rho_at(linear_system(A, np.ones(4)), full_distribution(4), np.zeros(4)), 1.0, rtol=1e-8)


def test_san_rho_matches_brute_force_enumeration():
    problem = random_logistic(6, 2, 2, lam=0.5)
    system = build_function_splitting(problem)
    dist = san_distribution(problem)
    x = np.random.default_rng(6).standard_normal(system.dim_in) * 0.1

    G = system.grad_F(x)
    H = np.zeros((system.dim_out, system.dim_out))
    outcomes = dist.outcomes(x)
    for o in outcomes:
        inner = o.S.T @ G.T @ np.linalg.inv(o.W) @ G @ o.S
        H += o.prob * o.S @ np.linalg.pinv(inner) @ o.S.T
    values = []
    for o in outcomes:
        R = np.linalg.inv(np.real(scipy.linalg.sqrtm(o.W)))
        eig = np.linalg.eigvalsh(R @ G @ H @ G.T @ R)
        values.append(eig[eig > 1e-10 * eig[-1]].min())

    rho = rho_at(system, dist, x)
    assert 0.0 < rho <= 1.0 + 1e-12
    assert_allclose(rho, min(values), rtol=1e-8)


def test_contraction_coordinate_descent_rate():
    A = np.diag([1.0, 2.0])
    system = linear_system(A, A @ np.ones(2))
    result = contraction_experiment(system, coordinate_distribution(A), np.zeros(2),
                                    steps=10, trials=2000, seed=0)
    assert_allclose(result.rho, 1.0 / 3.0)
    assert result.empirical_rate <= 2.0 / 3.0 + 0.05
    assert result.within_bound
    s = result.mean_surrogate
    assert np.all(s[1:] <= 1.02 * s[:-1])


def test_contraction_orthogonal_coordinates():
    system = linear_system(np.eye(2), np.ones(2))
    result = contraction_experiment(system, coordinate_distribution(np.eye(2)), np.zeros(2),
                                    steps=6, trials=4000, seed=1)
    assert abs(result.empirical_rate - 0.5) < 0.05


def test_contraction_frozen_with_zero_step():
    A = np.diag([1.0, 2.0])
    result = contraction_experiment(linear_system(A, np.ones(2)), coordinate_distribution(A), np.zeros(2),
                                    steps=5, trials=10, seed=0, gamma=0.0)
    assert result.empirical_rate == 1.0
    assert_allclose(result.mean_error, result.mean_error[0])


def test_contraction_needs_linear_system_and_constant_metric():
    problem = synth_least_squares(3, 1, seed=0, lam=0.5)
    system = build_function_splitting(problem)
    with pytest.raises(ConfigError):
        contraction_experiment(system, san_distribution(problem), np.zeros(system.dim_in), 5, 10, 0)
    nonlinear = build_function_splitting(random_logistic(0, 3, 1))
    with pytest.raises(ConfigError):
        contraction_experiment(nonlinear, full_distribution(nonlinear.dim_out), np.zeros(nonlinear.dim_in), 5, 10, 0)


def test_fit_geometric_rate():
    assert_allclose(fit_geometric_rate(0.8 ** np.arange(10)), 0.8)
    assert fit_geometric_rate(np.array([1.0, 0.0, 0.0])) == 0.0


def test_contraction_on_random_spd_within_bound():
    A = random_spd(3, 8)
    system = linear_system(A, A @ np.ones(8))
    result = contraction_experiment(system, coordinate_distribution(A), np.zeros(8),
                                    steps=20, trials=2000, seed=0)
    assert 0.0 < result.rho <= 1.0
    assert result.empirical_rate <= 1.0 - result.rho + 0.05
