from typing import Tuple

import numpy as np
import scipy.sparse as sp

from membrane.domain.base import FrozenSchema


class TorusMesh(FrozenSchema):
    """Friedrichs-Keller triangulation of the unit square with periodic identification.

    Vertex (i, j) sits at (i/n, j/n) and has index i + j*n (i fastest).
    """

    n: int
    hx: float
    triangles: np.ndarray
    coordinates: np.ndarray

    @property
    def vertex_count(self) -> int:
        return self.n * self.n

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    def index(self, i: int, j: int) -> int:
        """Vertex index of grid position (i, j), wrapped periodically."""
        return (i % self.n) + (j % self.n) * self.n


class SparseMatrix(FrozenSchema):
    """Compressed-row operator with a symmetry flag."""

    csr: sp.csr_matrix
    symmetric: bool = True

    @property
    def indptr(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def data(self) -> np.ndarray:
        return self.csr.data

    @property
    def dim(self) -> int:
        return int(self.csr.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.csr.shape

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ (self.csr @ x))
