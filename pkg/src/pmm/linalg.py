"""Dense symmetric linear algebra kernels.

Everything here is deliberately dense and deterministic: a cyclic Jacobi
eigensolver for symmetric matrices, the isometric vectorization svec/smat
(off-diagonals scaled by sqrt(2) so Euclidean geometry on packed vectors
equals Frobenius geometry on matrices), and Cholesky-based SPD solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """An iterative kernel failed to converge within its cap."""


class NotSpdError(NumericalError):
    """The matrix handed to an SPD factorization is not positive definite."""


_SQRT2 = math.sqrt(2.0)


def sym_part(A: np.ndarray) -> np.ndarray:
    """Exact symmetrization (A + A^T) / 2."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenvalues sorted descending, matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _offdiag_norm(A: np.ndarray) -> float:
    n = A.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return float(np.sqrt(np.sum(A[mask] ** 2)))


def sym_eig(S: np.ndarray, max_sweeps: int = 100) -> EigDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Deterministic for identical input: rotations run in fixed row-cyclic
    order and eigenvector signs are normalized so each column's largest
    magnitude entry is positive.  Raises NumericalError if the off-diagonal
    Frobenius norm is not below 1e-12 * ||S||_F after `max_sweeps` sweeps.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix entries must be finite")
    n = S.shape[0]
    scale = float(np.linalg.norm(S))
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-8 * (1.0 + scale):
        raise ValueError("matrix is not symmetric")

    A = sym_part(S)
    V = np.eye(n)
    tol = 1e-12 * scale
    if n == 1 or _offdiag_norm(A) <= tol:
        return _sorted_eig(np.diag(A).copy(), V)

    for _ in range(max_sweeps):
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # classic stable rotation angle
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0

                vec_p = V[:, p].copy()
                vec_q = V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
        if _offdiag_norm(A) <= tol:
            return _sorted_eig(np.diag(A).copy(), V)
    raise NumericalError(f"Jacobi sweep cap ({max_sweeps}) hit before convergence")


def _sorted_eig(eigenvalues: np.ndarray, V: np.ndarray) -> EigDecomposition:
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    V = V[:, order]
    for j in range(V.shape[1]):
        lead = int(np.argmax(np.abs(V[:, j])))
        if V[lead, j] < 0.0:
            V[:, j] = -V[:, j]
    return EigDecomposition(eigenvalues=eigenvalues, eigenvectors=V)


def svec(S: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix into a row-major upper-triangle vector.

    Off-diagonal entries are scaled by sqrt(2), so ||svec(S)||_2 = ||S||_F
    and <svec(S), svec(T)> = trace(S T).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    n = S.shape[0]
    rows, cols = np.triu_indices(n)
    out = S[rows, cols].copy()
    out[rows != cols] *= _SQRT2
    return out


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of svec: rebuild the full symmetric matrix."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-D packed vector")
    length = v.shape[0]
    n = int(round((math.sqrt(8.0 * length + 1.0) - 1.0) / 2.0))
    if n * (n + 1) // 2 != length:
        raise ValueError(f"packed length {length} is not triangular")
    rows, cols = np.triu_indices(n)
    vals = v.copy()
    vals[rows != cols] /= _SQRT2
    S = np.zeros((n, n))
    S[rows, cols] = vals
    S[cols, rows] = vals
    return S


def svec_dim(n: int) -> int:
    """Packed length n(n+1)/2 of an n x n symmetric matrix."""
    return n * (n + 1) // 2


def spd_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs for symmetric positive definite M via Cholesky.

    One step of iterative refinement keeps the residual at
    ||M x - rhs|| <= 1e-10 * (1 + ||rhs||) for reasonably conditioned M.
    Raises NotSpdError when the factorization meets a non-positive pivot.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSpdError(f"Cholesky failed: {exc}") from exc
    x = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise NotSpdError("Cholesky solve produced non-finite values")
    resid = rhs - M @ x
    x = x + scipy.linalg.cho_solve(factor, resid, check_finite=False)
    return x
