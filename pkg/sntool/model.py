# sntool/model.py
"""
Regularized generalized linear models:

    f_i(w) = phi_i(<a_i, w>) + lam * R(w),    f(w) = 1/n sum_i f_i(w)

Losses are scalar functions of the margin t = <a_i, w> and the label y_i.
Regularizers are separable, so their Hessian is diagonal. The Hessian of f_i
is never formed as a d x d matrix: hess_fi returns the diagonal-plus-rank-one
structure (lam R''(w), phi''_i, a_i).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ConfigError
from .linalg import DiagRank1, min_pos_eig

LOSS_KINDS = ("logistic", "squared")
REG_KINDS = ("l2", "pseudo_huber")


@dataclass(frozen=True)
class Loss:
    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"Unsupported loss kind: {self.kind!r}")


@dataclass(frozen=True)
class Regularizer:
    kind: str = "l2"
    lam: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in REG_KINDS:
            raise ConfigError(f"Unsupported regularizer kind: {self.kind!r}")
        if self.lam < 0:
            raise ConfigError("Regularization weight must be nonnegative")
        if self.kind == "pseudo_huber" and self.delta <= 0:
            raise ConfigError("pseudo-Huber delta must be positive")


@dataclass
class GlmProblem:
    """n sparse rows a_i (CSR, dimension d), labels y_i, a loss and a regularizer."""
    rows: sp.csr_matrix
    labels: np.ndarray
    loss: Loss
    reg: Regularizer

    def __post_init__(self):
        self.rows = sp.csr_matrix(self.rows, dtype=float)
        self.rows.sort_indices()
        self.labels = np.asarray(self.labels, dtype=float)
        n, d = self.rows.shape
        if n < 1 or d < 1:
            raise ConfigError(f"Problem needs n >= 1 and d >= 1, got n={n}, d={d}")
        if self.labels.shape != (n,):
            raise ConfigError(f"Expected {n} labels, got shape {self.labels.shape}")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """(indices, values) of data row i."""
        if not 0 <= i < self.n:
            raise IndexError(f"row index {i} out of range for n={self.n}")
        start, stop = self.rows.indptr[i], self.rows.indptr[i + 1]
        return self.rows.indices[start:stop], self.rows.data[start:stop]

    def row_dense(self, i: int) -> np.ndarray:
        idx, val = self.row(i)
        a = np.zeros(self.d)
        a[idx] = val
        return a

    def with_reg(self, reg: Regularizer) -> "GlmProblem":
        return GlmProblem(self.rows, self.labels, self.loss, reg)


# ---------------------------
# Scalar calculus
# ---------------------------

def loss_eval(loss: Loss, t, y):
    """
    Return (phi(t), phi'(t), phi''(t)). Works on scalars and on numpy arrays.

    logistic: phi(t) = log(1 + exp(-y t)), evaluated as softplus(-y t)
    squared:  phi(t) = 1/2 (t - y)^2
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if loss.kind == "logistic":
        z = y * t
        value = np.logaddexp(0.0, -z)
        sig_neg = expit(-z)
        d1 = -y * sig_neg
        d2 = expit(z) * sig_neg
    else:
        r = t - y
        value = 0.5 * r * r
        d1 = r
        d2 = np.ones_like(r)
    if value.ndim == 0:
        return float(value), float(d1), float(d2)
    return value, d1, d2


def reg_eval(reg: Regularizer, w: np.ndarray):
    """Return (lam R(w), lam grad R(w), lam diag Hess R(w))."""
    w = np.asarray(w, dtype=float)
    if reg.kind == "l2":
        value = 0.5 * np.dot(w, w)
        grad = w.copy()
        hess = np.ones_like(w)
    else:
        delta = reg.delta
        q = 1.0 + (w / delta) ** 2
        root = np.sqrt(q)
        value = delta * delta * np.sum(root - 1.0)
        grad = w / root
        hess = q ** -1.5
    return reg.lam * float(value), reg.lam * grad, reg.lam * hess


# ---------------------------
# Per-term and full objective
# ---------------------------

def grad_fi(problem: GlmProblem, i: int, w: np.ndarray) -> np.ndarray:
    """grad f_i(w) = lam grad R(w) + phi_i'(<a_i, w>) a_i."""
    idx, val = problem.row(i)
    t = float(np.dot(val, w[idx]))
    _, d1, _ = loss_eval(problem.loss, t, problem.labels[i])
    _, grad, _ = reg_eval(problem.reg, w)
    grad[idx] += d1 * val
    return grad


def hess_fi(problem: GlmProblem, i: int, w: np.ndarray, mu: float = 0.0) -> DiagRank1:
    """mu I + Hess f_i(w) as Diag(mu + lam R''(w)) + phi_i'' a_i a_i^T."""
    idx, val = problem.row(i)
    t = float(np.dot(val, w[idx]))
    _, _, d2 = loss_eval(problem.loss, t, problem.labels[i])
    _, _, hdiag = reg_eval(problem.reg, w)
    return DiagRank1(mu + hdiag, d2, idx, val)


def grad_hess_fi(problem: GlmProblem, i: int, w: np.ndarray, mu: float = 0.0) -> Tuple[np.ndarray, DiagRank1]:
    """grad_fi and hess_fi from a single read of row i."""
    idx, val = problem.row(i)
    t = float(np.dot(val, w[idx]))
    _, d1, d2 = loss_eval(problem.loss, t, problem.labels[i])
    _, grad, hdiag = reg_eval(problem.reg, w)
    grad[idx] += d1 * val
    return grad, DiagRank1(mu + hdiag, d2, idx, val)


def full_objective_and_grad(problem: GlmProblem, w: np.ndarray) -> Tuple[float, np.ndarray]:
    """f(w) = 1/n sum f_i(w) and its gradient."""
    w = np.asarray(w, dtype=float)
    t = problem.rows @ w
    values, d1, _ = loss_eval(problem.loss, t, problem.labels)
    r_val, r_grad, _ = reg_eval(problem.reg, w)
    n = problem.n
    f = float(np.sum(values)) / n + r_val
    grad = problem.rows.T @ d1 / n + r_grad
    return f, np.asarray(grad, dtype=float)


def full_hessian(problem: GlmProblem, w: np.ndarray) -> np.ndarray:
    """Dense d x d Hessian of f. Desk-scale helper."""
    t = problem.rows @ w
    _, _, d2 = loss_eval(problem.loss, t, problem.labels)
    _, _, hdiag = reg_eval(problem.reg, w)
    A = problem.rows
    H = (A.T @ sp.diags(d2) @ A).toarray() / problem.n
    H[np.diag_indices_from(H)] += hdiag
    return H


def lmax(problem: GlmProblem) -> float:
    """
    Largest smoothness constant of the f_i:
      logistic: L_i = 1/4 ||a_i||^2 + lam,  squared: L_i = ||a_i||^2 + lam.
    The pseudo-Huber Hessian is bounded by lam I, same as L2.
    """
    row_sq = np.asarray(problem.rows.multiply(problem.rows).sum(axis=1)).ravel()
    if problem.loss.kind == "logistic":
        curvature = 0.25
    elif problem.loss.kind == "squared":
        curvature = 1.0
    else:
        raise ConfigError(f"No smoothness constant for loss {problem.loss.kind!r}")
    return float(curvature * row_sq.max() + problem.reg.lam)


def describe_problem(problem: GlmProblem, dense_cap: int = 4096) -> dict:
    """
    Dataset metadata: n, d, L_max, sparsity (fraction of zero entries) and,
    when min(n, d) <= dense_cap, the condition number
    sqrt(lambda_max(A A^T) / lambda_min^+(A A^T)).
    """
    n, d = problem.n, problem.d
    info = {
        "n": n,
        "d": d,
        "lmax": lmax(problem),
        "sparsity": 1.0 - problem.rows.nnz / float(n * d),
        "condition_number": None,
    }
    if min(n, d) <= dense_cap:
        A = problem.rows
        gram = (A.T @ A).toarray() if d <= n else (A @ A.T).toarray()
        lam_max = float(np.linalg.eigvalsh(gram)[-1])
        if lam_max > 0:
            info["condition_number"] = float(np.sqrt(lam_max / min_pos_eig(gram)))
    return info
