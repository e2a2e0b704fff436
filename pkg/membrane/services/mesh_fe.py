"""Periodic Friedrichs-Keller mesh of the unit torus and P1 finite-element assembly."""
import logging
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from membrane.core.exceptions import InvalidMeshException, InvalidParameterException
from membrane.domain.mesh import SparseMatrix, TorusMesh
from membrane.domain.params import SYMMETRY_TOL

logger = logging.getLogger(__name__)

# Consistent P1 mass matrix of a triangle with unit area
_MASS_TEMPLATE = np.array(
    [[2.0, 1.0, 1.0],
     [1.0, 2.0, 1.0],
     [1.0, 1.0, 2.0]]
) / 12.0


def build_torus_mesh(n: int) -> TorusMesh:
    """Split every grid cell along its lower-left to upper-right diagonal."""
    if n < 4:
        raise InvalidMeshException(f"torus mesh needs n >= 4 vertices per side, got {n}")

    k = np.arange(n * n)
    i = k % n
    j = k // n
    v00 = i + j * n
    v10 = (i + 1) % n + j * n
    v01 = i + ((j + 1) % n) * n
    v11 = (i + 1) % n + ((j + 1) % n) * n

    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3).astype(np.int64)
    coordinates = np.column_stack([i / n, j / n])

    logger.debug(f"Built torus mesh n={n}: {n * n} vertices, {triangles.shape[0]} triangles")
    return TorusMesh(n=n, hx=1.0 / n, triangles=triangles, coordinates=coordinates)


def element_coordinates(mesh: TorusMesh) -> np.ndarray:
    """Unwrapped vertex coordinates of every triangle, shape (T, 3, 2)."""
    h = mesh.hx
    lower = np.array([[0.0, 0.0], [h, 0.0], [h, h]])
    upper = np.array([[0.0, 0.0], [h, h], [0.0, h]])
    local = np.stack([lower, upper] * (mesh.n * mesh.n))
    anchors = mesh.coordinates[mesh.triangles[:, 0]]
    return anchors[:, None, :] + local


def _gradients(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Areas (T,) and constant basis gradients (T, 2, 3) of P1 triangles."""
    x = coords[:, :, 0]
    y = coords[:, :, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * np.abs(det)
    B = np.empty((coords.shape[0], 2, 3))
    B[:, 0, 0] = y[:, 1] - y[:, 2]
    B[:, 0, 1] = y[:, 2] - y[:, 0]
    B[:, 0, 2] = y[:, 0] - y[:, 1]
    B[:, 1, 0] = x[:, 2] - x[:, 1]
    B[:, 1, 1] = x[:, 0] - x[:, 2]
    B[:, 1, 2] = x[:, 1] - x[:, 0]
    B /= det[:, None, None]
    return area, B


def basis_gradients(mesh: TorusMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Per-triangle areas and P1 basis gradients."""
    return _gradients(element_coordinates(mesh))


def _assemble(mesh: TorusMesh, local: np.ndarray) -> sp.csr_matrix:
    # element matrices are exactly symmetric, and duplicates for (p, q) and
    # (q, p) are summed in the same element order, so the result is too
    local = 0.5 * (local + np.transpose(local, (0, 2, 1)))
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], local.shape).ravel()
    N = mesh.vertex_count
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def _checked(matrix: sp.csr_matrix) -> SparseMatrix:
    scale = float(np.abs(matrix.data).max()) if matrix.nnz else 0.0
    asym = abs(matrix - matrix.T)
    err = float(asym.max()) if asym.nnz else 0.0
    if err > SYMMETRY_TOL * max(scale, 1e-300):
        raise InvalidParameterException(f"assembled matrix is not symmetric (error {err:.3e})")
    return SparseMatrix(csr=matrix, symmetric=True)


def assemble_mass(mesh: TorusMesh, lumped: bool = False) -> SparseMatrix:
    """Consistent P1 mass matrix, or its row-sum lumped diagonal."""
    area, _ = basis_gradients(mesh)
    local = area[:, None, None] * _MASS_TEMPLATE[None, :, :]
    consistent = _assemble(mesh, local)
    if not lumped:
        return _checked(consistent)
    row_sums = np.asarray(consistent.sum(axis=1)).ravel()
    return SparseMatrix(csr=sp.diags(row_sums, format="csr"), symmetric=True)


def validate_coefficient(A: np.ndarray, semidefinite: bool = False) -> np.ndarray:
    """Check that A is a symmetric 2x2 matrix with positive (or nonnegative) spectrum."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.all(np.isfinite(A)):
        raise InvalidParameterException(f"coefficient must be a finite 2x2 matrix, got {A.tolist()}")
    scale = max(float(np.abs(A).max()), 1.0)
    if abs(A[0, 1] - A[1, 0]) > SYMMETRY_TOL * scale:
        raise InvalidParameterException(f"coefficient matrix {A.tolist()} is not symmetric")
    lowest = float(np.linalg.eigvalsh(A).min())
    floor = SYMMETRY_TOL * scale
    if lowest < -floor or (lowest <= floor and not semidefinite):
        kind = "semidefinite" if semidefinite else "definite"
        raise InvalidParameterException(f"coefficient matrix {A.tolist()} is not positive {kind}")
    return A


def assemble_stiffness(mesh: TorusMesh, A: np.ndarray = None, semidefinite: bool = False) -> SparseMatrix:
    """P1 matrix of the form <A grad u, grad v>; A defaults to the identity.

    ``semidefinite`` admits A = 0, used for a switched-off coupling.
    """
    A = np.eye(2) if A is None else validate_coefficient(A, semidefinite=semidefinite)
    area, B = basis_gradients(mesh)
    local = area[:, None, None] * np.einsum("tka,kl,tlb->tab", B, A, B)
    return _checked(_assemble(mesh, local))
