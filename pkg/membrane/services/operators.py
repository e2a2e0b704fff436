"""Assembled operators shared by the time stepper, the diagnostics and the CLI."""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.sparse.linalg import splu

from membrane.core.config import settings
from membrane.core.exceptions import ValidationException
from membrane.domain.base import FrozenSchema
from membrane.domain.mesh import SparseMatrix, TorusMesh
from membrane.domain.params import ModelParams
from membrane.domain.state import SolveReport
from membrane.services.mesh_fe import assemble_mass, assemble_stiffness
from membrane.services.sparse_linalg import BlockSaddleMatrix, cg_solve

logger = logging.getLogger(__name__)


class PoissonSolver:
    """Mean-free solution operator of the discrete periodic Laplacian, K z = f.

    ``kind="cg"`` runs a mean-projected Jacobi-CG per call; ``kind="factorized"``
    pins one vertex, factorizes once and projects the result.
    """

    def __init__(self, K: SparseMatrix, kind: str = "cg"):
        if kind not in ("cg", "factorized"):
            raise ValidationException(f"unknown Poisson solver '{kind}'")
        self.K = K
        self.kind = kind
        self._lu = None
        if kind == "factorized":
            pinned = K.csr[1:, 1:].tocsc()
            self._lu = splu(pinned)

    def solve(self, f: np.ndarray, tol: Optional[float] = None) -> Tuple[np.ndarray, SolveReport]:
        f = f - f.mean()
        if self._lu is not None:
            z = np.zeros_like(f)
            z[1:] = self._lu.solve(f[1:])
            return z - z.mean(), SolveReport(iterations=0, residual_norm=0.0, converged=True)
        return cg_solve(self.K, f, tol=tol, preconditioner="jacobi", project_mean=True)


class SchemeMatrices(FrozenSchema):
    """Everything a time step needs that does not change between steps."""

    mesh: TorusMesh
    M: SparseMatrix
    M_lumped: np.ndarray
    K: SparseMatrix
    K_G: SparseMatrix
    K_L: SparseMatrix
    saddle: BlockSaddleMatrix
    poisson: PoissonSolver
    tau: float
    kappa: float

    @property
    def area(self) -> float:
        return float(self.M_lumped.sum())

    def discrete_mean(self, v: np.ndarray) -> float:
        """<v, 1>_h / |Omega|."""
        return float(self.M_lumped @ v) / self.area

    def integral(self, v: np.ndarray) -> float:
        """<v, 1>_h."""
        return float(self.M_lumped @ v)


def build_saddle(M: SparseMatrix, K: SparseMatrix, K_G: SparseMatrix, tau: float, kappa: float) -> BlockSaddleMatrix:
    """[[M/tau + K_G, kappa K], [kappa K, -kappa M]], the height/curvature system."""
    A = SparseMatrix(csr=(M.csr / tau + K_G.csr).tocsr(), symmetric=True)
    B = SparseMatrix(csr=(kappa * K.csr).tocsr(), symmetric=True)
    C = SparseMatrix(csr=(kappa * M.csr).tocsr(), symmetric=True)
    return BlockSaddleMatrix(A=A, B=B, C=C)


def assemble_matrices(mesh: TorusMesh, params: ModelParams, poisson_solver: Optional[str] = None) -> SchemeMatrices:
    """Assemble M, lumped M, K, K_G, K_L and the height saddle operator."""
    kind = poisson_solver or settings.poisson_solver
    M = assemble_mass(mesh, lumped=False)
    M_lumped = assemble_mass(mesh, lumped=True).diagonal()
    K = assemble_stiffness(mesh)
    K_G = assemble_stiffness(mesh, params.G)
    K_L = assemble_stiffness(mesh, params.L, semidefinite=True)
    saddle = build_saddle(M, K, K_G, params.tau, params.kappa)
    logger.debug(f"Assembled scheme matrices n={mesh.n}, poisson={kind}")
    return SchemeMatrices(
        mesh=mesh,
        M=M,
        M_lumped=M_lumped,
        K=K,
        K_G=K_G,
        K_L=K_L,
        saddle=saddle,
        poisson=PoissonSolver(K, kind),
        tau=params.tau,
        kappa=params.kappa,
    )


def saddle_for(matrices: SchemeMatrices, params: ModelParams) -> BlockSaddleMatrix:
    """The assembled saddle operator, rebuilt if tau or kappa differ."""
    if params.tau == matrices.tau and params.kappa == matrices.kappa:
        return matrices.saddle
    return build_saddle(matrices.M, matrices.K, matrices.K_G, params.tau, params.kappa)

