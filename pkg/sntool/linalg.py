# sntool/linalg.py
"""
Small dense and structured linear algebra.

- DiagRank1 / solve_diag_rank1: M = Diag(diag) + scale * u u^T solved in O(d + nnz(u))
  with the Sherman-Morrison formula.
- least_norm_solve / pseudo_inverse: SVD with singular-value cutoff 1e-12 * sigma_max.
- weighted_sketch_project: argmin 1/2 ||x||_W^2 subject to S^T A x = S^T b.
- min_pos_eig, inv_sqrt_spd: eigenvalue helpers for rate estimates.

The dense routines are meant for desk-scale problems (the oracle engine and
the SNM / SAN-id steps); nothing here tries to be a sparse factorization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError

SVD_CUTOFF = 1e-12
EIG_CUTOFF = 1e-10
SM_DENOM_GUARD = 1e-14


@dataclass
class DiagRank1:
    """Represents M = Diag(diag) + scale * u u^T with a sparse u."""
    diag: np.ndarray
    scale: float
    u_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    u_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_dense(cls, diag, scale: float, u) -> "DiagRank1":
        u = np.asarray(u, dtype=float)
        idx = np.flatnonzero(u)
        return cls(np.asarray(diag, dtype=float), float(scale), idx, u[idx])

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        if self.scale != 0.0 and self.u_values.size:
            out[self.u_indices] += self.scale * np.dot(self.u_values, x[self.u_indices]) * self.u_values
        return out

    def to_dense(self) -> np.ndarray:
        M = np.diag(self.diag.astype(float))
        if self.u_values.size:
            ix = np.ix_(self.u_indices, self.u_indices)
            M[ix] += self.scale * np.outer(self.u_values, self.u_values)
        return M


def solve_diag_rank1(m: DiagRank1, rhs: np.ndarray) -> np.ndarray:
    """
    Return M^{-1} rhs for M = D + scale * u u^T:

        D^{-1} rhs - [scale <a_hat, rhs> / (1 + scale <a_hat, u>)] a_hat,   a_hat = D^{-1} u
    """
    if np.any(m.diag <= 0.0):
        raise NumericalError("diagonal-plus-rank-one solve needs a strictly positive diagonal")
    rhs = np.asarray(rhs, dtype=float)
    x = rhs / m.diag
    if m.scale == 0.0 or m.u_values.size == 0:
        return x

    # a_hat shares the support of u because D is diagonal
    a_hat = m.u_values / m.diag[m.u_indices]
    denom = 1.0 + m.scale * np.dot(a_hat, m.u_values)
    if denom <= SM_DENOM_GUARD:
        raise NumericalError(f"Sherman-Morrison denominator {denom:.3e} is not positive")
    coef = m.scale * np.dot(a_hat, rhs[m.u_indices]) / denom
    x[m.u_indices] -= coef * a_hat
    return x


def sherman_morrison_update(M_inv: np.ndarray, u: np.ndarray, c: float) -> np.ndarray:
    """Given M^{-1}, return (M + c u u^T)^{-1}."""
    Mu = M_inv @ u
    denom = 1.0 + c * np.dot(u, Mu)
    if abs(denom) <= SM_DENOM_GUARD:
        raise NumericalError("rank-one update makes the matrix singular")
    return M_inv - (c / denom) * np.outer(Mu, Mu)


def _svd(A: np.ndarray):
    try:
        return scipy.linalg.svd(A, full_matrices=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc


def pseudo_inverse(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with cutoff SVD_CUTOFF * sigma_max."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros((A.shape[1], A.shape[0]))
    U, s, Vt = _svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > SVD_CUTOFF * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def least_norm_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Return A^+ b, the minimum Euclidean norm solution of A x = b.
    Raises NumericalError when b is not in range(A).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.size == 0:
        return np.zeros(A.shape[1])

    U, s, Vt = _svd(A)
    if s.size == 0 or s[0] == 0.0:
        x = np.zeros(A.shape[1])
        sigma_max = 0.0
    else:
        sigma_max = s[0]
        keep = s > SVD_CUTOFF * sigma_max
        x = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])

    residual = np.linalg.norm(A @ x - b)
    b_norm = np.linalg.norm(b)
    # the second term absorbs rounding when b itself is ~0
    if residual > 1e-8 * b_norm + 1e-14 * sigma_max * np.linalg.norm(x):
        raise NumericalError(
            f"inconsistent linear system: residual {residual:.3e} for ||b|| = {b_norm:.3e}"
        )
    return x


def cholesky(W: np.ndarray):
    """cho_factor wrapper that reports non-SPD input as NumericalError."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if not np.allclose(W, W.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(W).max(initial=0.0))):
        raise NumericalError("metric matrix is not symmetric")
    try:
        return scipy.linalg.cho_factor(W, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"metric matrix is not positive definite: {exc}") from exc


def solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return scipy.linalg.cho_solve(cholesky(M), rhs)


def weighted_sketch_project(A: np.ndarray, S: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Minimizer of 1/2 ||x||_W^2 subject to S^T A x = S^T b:

        x* = W^{-1} A^T S (S^T A W^{-1} A^T S)^+ S^T b
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    b = np.atleast_1d(np.asarray(b, dtype=float))

    factor = cholesky(W)
    if S.size == 0 or not np.any(S):
        return np.zeros(A.shape[1])

    SA = S.T @ A
    W_inv_AtS = scipy.linalg.cho_solve(factor, SA.T)
    gram = SA @ W_inv_AtS
    y = least_norm_solve(gram, S.T @ b)
    return W_inv_AtS @ y


def min_pos_eig(M: np.ndarray) -> float:
    """Smallest eigenvalue above EIG_CUTOFF * lambda_max of a symmetric PSD matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    M = 0.5 * (M + M.T)
    eigvals = scipy.linalg.eigvalsh(M)
    lam_max = eigvals[-1]
    if lam_max <= 0.0:
        raise NumericalError("matrix has no positive eigenvalue")
    positive = eigvals[eigvals > EIG_CUTOFF * lam_max]
    return float(positive[0])


def inv_sqrt_spd(W: np.ndarray) -> np.ndarray:
    """W^{-1/2} through a symmetric eigendecomposition."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    eigvals, V = scipy.linalg.eigh(0.5 * (W + W.T))
    if eigvals[0] <= 0.0:
        raise NumericalError("metric matrix is not positive definite")
    return (V / np.sqrt(eigvals)) @ V.T
