import os
import sys

# Persistence stays off unless a test opts in with its own RunStore
os.environ.setdefault("SNTOOL_DB_ENABLED", "0")

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
import scipy.sparse as sp

from sntool.model import GlmProblem, Loss, Regularizer

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")


def make_problem(rows, labels, loss="logistic", reg="l2", lam=0.0, delta=1.0):
    return GlmProblem(sp.csr_matrix(np.atleast_2d(np.asarray(rows, dtype=float))),
                      np.asarray(labels, dtype=float), Loss(loss), Regularizer(reg, lam, delta))


def random_logistic(seed, n, d, lam=None, density=1.0, reg="l2"):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    if density < 1.0:
        A *= rng.random((n, d)) < density
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return make_problem(A, y, "logistic", reg, 1.0 / n if lam is None else lam)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def small_logistic():
    return random_logistic(0, 8, 4, lam=0.1)


@pytest.fixture
def quadratic_1d():
    """f_j(w) = 1/2 w^2 for both points: squared loss, a = 1, y = 0, no regularizer."""
    return make_problem([[1.0], [1.0]], [0.0, 0.0], loss="squared", lam=0.0)
