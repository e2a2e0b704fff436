from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from membrane.core.config import settings
from membrane.domain.mesh import TorusMesh
from membrane.domain.params import ModelParams
from membrane.services.mesh_fe import build_torus_mesh
from membrane.services.operators import SchemeMatrices, assemble_matrices


@lru_cache(maxsize=8)
def get_mesh(n: int) -> TorusMesh:
    """Meshes are immutable, so one instance per size is shared."""
    return build_torus_mesh(n)


def _matrix_key(a: np.ndarray) -> Tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(a, dtype=float).ravel())


@lru_cache(maxsize=32)
def _cached_matrices(n: int, params_key: Tuple, poisson_solver: str) -> SchemeMatrices:
    eps, kappa, tau, g_key, l_key = params_key
    params = ModelParams(
        eps=eps,
        kappa=kappa,
        tau=tau,
        G=np.array(g_key).reshape(2, 2),
        L=np.array(l_key).reshape(2, 2),
    )
    return assemble_matrices(get_mesh(n), params, poisson_solver=poisson_solver)


def get_matrices(n: int, params: ModelParams, poisson_solver: Optional[str] = None) -> SchemeMatrices:
    """Assembled scheme matrices for a mesh size and parameter set."""
    poisson_solver = poisson_solver or settings.poisson_solver
    key = (params.eps, params.kappa, params.tau, _matrix_key(params.G), _matrix_key(params.L))
    return _cached_matrices(n, key, poisson_solver)
