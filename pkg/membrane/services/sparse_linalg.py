"""Krylov and dense solvers for the SPD and saddle point systems of the scheme."""
import logging
import warnings
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from membrane.core.config import settings
from membrane.core.exceptions import (
    PreconditionException,
    SingularMatrixException,
    ValidationException,
)
from membrane.domain.base import FrozenSchema
from membrane.domain.mesh import SparseMatrix
from membrane.domain.state import SolveReport

logger = logging.getLogger(__name__)

DENSE_MAX_DIM = 4096
PIVOT_THRESHOLD = 1e-12
MEAN_COMPATIBILITY_TOL = 1e-10

Operator = Union[SparseMatrix, sp.spmatrix, np.ndarray, LinearOperator, Callable[[np.ndarray], np.ndarray]]
Preconditioner = Union[None, str, np.ndarray, Callable[[np.ndarray], np.ndarray]]


class BlockSaddleMatrix(FrozenSchema):
    """Symmetric block operator [[A, B], [B^T, -C]] with A and C SPD."""

    A: SparseMatrix
    B: SparseMatrix
    C: SparseMatrix

    @property
    def block_dim(self) -> int:
        return self.A.dim

    @property
    def shape(self) -> Tuple[int, int]:
        N = 2 * self.block_dim
        return N, N

    def matvec(self, x: np.ndarray) -> np.ndarray:
        N = self.block_dim
        x1, x2 = x[:N], x[N:]
        top = self.A.csr @ x1 + self.B.csr @ x2
        bottom = self.B.csr.T @ x1 - self.C.csr @ x2
        return np.concatenate([top, bottom])

    def to_sparse(self) -> sp.csr_matrix:
        return sp.bmat(
            [[self.A.csr, self.B.csr], [self.B.csr.T, -self.C.csr]], format="csr"
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def block_jacobi_diagonal(self) -> np.ndarray:
        """Diagonal of the default preconditioner diag(A) (+) diag(C)."""
        return np.concatenate([self.A.diagonal(), self.C.diagonal()])


def as_operator(A: Operator, dim: int) -> LinearOperator:
    """Wrap matrices, saddle blocks and bare callbacks as a LinearOperator."""
    if isinstance(A, LinearOperator):
        return A
    if isinstance(A, SparseMatrix):
        return aslinearoperator(A.csr)
    if isinstance(A, BlockSaddleMatrix):
        return LinearOperator(A.shape, matvec=A.matvec, dtype=float)
    if isinstance(A, np.ndarray) or sp.issparse(A):
        return aslinearoperator(A)
    if callable(A):
        return LinearOperator((dim, dim), matvec=A, dtype=float)
    raise ValidationException(f"unsupported operator type {type(A).__name__}")


def _operator_diagonal(A: Operator) -> Optional[np.ndarray]:
    if isinstance(A, SparseMatrix):
        return A.diagonal()
    if isinstance(A, BlockSaddleMatrix):
        return A.block_jacobi_diagonal()
    if isinstance(A, np.ndarray):
        return np.diag(A).copy()
    if sp.issparse(A):
        return A.diagonal()
    return None


def _preconditioner(A: Operator, M: Preconditioner, dim: int, absolute: bool) -> Callable[[np.ndarray], np.ndarray]:
    if M is None:
        return lambda r: r
    if callable(M) and not isinstance(M, np.ndarray):
        return M
    if isinstance(M, str):
        if M not in ("jacobi", "block_jacobi"):
            raise ValidationException(f"unknown preconditioner '{M}'")
        diag = _operator_diagonal(A)
        if diag is None:
            return lambda r: r
    else:
        diag = np.asarray(M, dtype=float)
    if diag.shape != (dim,):
        raise ValidationException(f"preconditioner diagonal has shape {diag.shape}, expected ({dim},)")
    if absolute:
        diag = np.abs(diag)
    if np.any(diag <= 0):
        raise ValidationException("diagonal preconditioner needs positive entries")
    inv = 1.0 / diag
    return lambda r: inv * r


def _project(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def cg_solve(
    A: Operator,
    b: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    preconditioner: Preconditioner = "jacobi",
    project_mean: bool = False,
    x0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients.

    With ``project_mean`` the operator may be singular with the constants as
    null space; b must then sum to zero and all iterates stay mean-free.
    """
    tol = settings.cg_tol if tol is None else tol
    b = np.asarray(b, dtype=float)
    dim = b.shape[0]
    op = as_operator(A, dim)
    if op.shape != (dim, dim):
        raise ValidationException(f"operator shape {op.shape} does not match right-hand side length {dim}")
    max_iter = max(2 * dim, 10) if max_iter is None else max_iter

    if project_mean and abs(b.sum()) > MEAN_COMPATIBILITY_TOL * max(np.abs(b).sum(), 1e-300):
        raise PreconditionException(
            f"singular system needs a mean-free right-hand side, got sum {b.sum():.3e}"
        )

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(dim), SolveReport(iterations=0, residual_norm=0.0, converged=True)

    project = _project if project_mean else (lambda v: v)
    apply_M = _preconditioner(A, preconditioner, dim, absolute=False)
    if project_mean:
        raw_M = apply_M
        apply_M = lambda r: _project(raw_M(r))

    x = np.zeros(dim) if x0 is None else project(np.array(x0, dtype=float))
    r = project(b - op.matvec(x))
    z = apply_M(r)
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r)) / b_norm]
    refresh = settings.residual_refresh

    iterations = 0
    converged = history[0] <= tol
    true_rel = history[0]
    while not converged and iterations < max_iter:
        Ap = project(op.matvec(p))
        pAp = float(p @ Ap)
        if pAp <= 0:
            logger.debug(f"CG breakdown at iteration {iterations}: p^T A p = {pAp:.3e}")
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        iterations += 1

        rel = float(np.linalg.norm(r)) / b_norm
        if rel <= tol or iterations % refresh == 0:
            r = project(b - op.matvec(x))
            true_rel = float(np.linalg.norm(r)) / b_norm
            rel = true_rel
            if true_rel <= tol:
                converged = True
                history.append(rel)
                break
        history.append(rel)

        z = apply_M(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    if not converged:
        true_rel = float(np.linalg.norm(project(b - op.matvec(x)))) / b_norm
        converged = true_rel <= tol
    return x, SolveReport(
        iterations=iterations,
        residual_norm=true_rel,
        converged=converged,
        residual_history=history,
    )


def minres_solve(
    S: Operator,
    rhs: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    preconditioner: Preconditioner = "block_jacobi",
    x0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Preconditioned MINRES for symmetric (indefinite) systems.

    The preconditioner must be SPD. ``residual_history`` records the
    preconditioned residual estimate, which never increases.
    """
    tol = settings.minres_tol if tol is None else tol
    b = np.asarray(rhs, dtype=float)
    dim = b.shape[0]
    op = as_operator(S, dim)
    if op.shape != (dim, dim):
        raise ValidationException(f"operator shape {op.shape} does not match right-hand side length {dim}")
    max_iter = max(5 * dim, 10) if max_iter is None else max_iter

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(dim), SolveReport(iterations=0, residual_norm=0.0, converged=True)

    apply_M = _preconditioner(S, preconditioner, dim, absolute=True)
    refresh = settings.residual_refresh
    eps = np.finfo(float).eps

    x = np.zeros(dim) if x0 is None else np.array(x0, dtype=float)
    r1 = b - op.matvec(x)
    y = apply_M(r1)
    beta1 = float(r1 @ y)
    if beta1 < 0:
        raise ValidationException("MINRES preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    true_rel = float(np.linalg.norm(r1)) / b_norm
    if beta1 == 0.0 or true_rel <= tol:
        return x, SolveReport(iterations=0, residual_norm=true_rel, converged=true_rel <= tol)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(dim)
    w2 = np.zeros(dim)
    r2 = r1.copy()
    history = [1.0]

    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        s = 1.0 / beta
        v = s * y
        y = op.matvec(v)
        if iterations >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = apply_M(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        beta = np.sqrt(max(beta_sq, 0.0))

        # previous rotation
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta

        # new rotation annihilating beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        history.append(abs(phibar) / beta1)
        lanczos_done = beta <= eps * beta1
        if abs(phibar) <= tol * beta1 or iterations % refresh == 0 or lanczos_done:
            true_rel = float(np.linalg.norm(b - op.matvec(x))) / b_norm
            if true_rel <= tol:
                converged = True
                break
        if lanczos_done:
            break

    if not converged:
        true_rel = float(np.linalg.norm(b - op.matvec(x))) / b_norm
        converged = true_rel <= tol
    return x, SolveReport(
        iterations=iterations,
        residual_norm=true_rel,
        converged=converged,
        residual_history=history,
    )


def dense_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU with partial pivoting; rejects pivots below 1e-12 of the largest entry."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationException(f"dense solve needs a square matrix, got shape {A.shape}")
    if A.shape[0] > DENSE_MAX_DIM:
        raise PreconditionException(f"dense solve limited to dimension {DENSE_MAX_DIM}, got {A.shape[0]}")
    if b.shape[0] != A.shape[0]:
        raise ValidationException(f"right-hand side length {b.shape[0]} does not match dimension {A.shape[0]}")

    scale = float(np.abs(A).max()) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixException("dense solve on the zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_THRESHOLD * scale:
        raise SingularMatrixException(
            f"matrix is singular to threshold: smallest pivot {pivots.min():.3e}, scale {scale:.3e}"
        )
    return sla.lu_solve((lu, piv), b)
