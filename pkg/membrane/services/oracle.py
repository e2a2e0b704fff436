"""Slow dense reference computations for tiny meshes.

Nothing here touches the Newton or Krylov code of the time stepper: the
oracles use dense matrices, a pseudo-inverse for the periodic Laplacian and
first-order descent.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import Field

from membrane.core.config import settings
from membrane.core.exceptions import OracleFailureException, PreconditionException
from membrane.domain.base import BaseSchema
from membrane.domain.config import OracleConfig
from membrane.domain.mesh import TorusMesh
from membrane.domain.params import ModelParams
from membrane.domain.potential import DEFAULT_POTENTIAL
from membrane.domain.state import SimState
from membrane.services.mesh_fe import assemble_mass, assemble_stiffness
from membrane.services.potentials import eval_split
from membrane.services.sparse_linalg import dense_solve

logger = logging.getLogger(__name__)

COUPLED_TAU_MAX = 1e-2
BB_STEP_MIN = 1e-12
BB_STEP_MAX = 1e12


class DenseOperators(BaseSchema):
    M: np.ndarray
    m: np.ndarray
    K: np.ndarray
    K_plus: np.ndarray
    K_G: np.ndarray
    K_L: np.ndarray


class CoupledOracleResult(BaseSchema):
    """Stationary point of the fully coupled minimizing-movement functional."""

    u: np.ndarray
    h: np.ndarray
    g: np.ndarray
    value: float
    gradient_norm: float
    sweeps: int = Field(ge=0)


def _check_size(mesh: TorusMesh, config: Optional[OracleConfig] = None):
    limit = min(settings.oracle_max_n, config.n) if config is not None else settings.oracle_max_n
    if mesh.n > limit:
        raise PreconditionException(f"oracle limited to n <= {limit}, got n={mesh.n}")


def dense_operators(mesh: TorusMesh, params: ModelParams) -> DenseOperators:
    M = assemble_mass(mesh).toarray()
    K = assemble_stiffness(mesh).toarray()
    return DenseOperators(
        M=M,
        m=M.sum(axis=1),
        K=K,
        K_plus=np.linalg.pinv(K, hermitian=True),
        K_G=assemble_stiffness(mesh, params.G).toarray(),
        K_L=assemble_stiffness(mesh, params.L, semidefinite=True).toarray(),
    )


def _tangent(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def _projected_descent(
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    u0: np.ndarray,
    tol: float,
    max_iter: int,
    armijo_c: float,
    strict: bool = True,
) -> Tuple[np.ndarray, float, float, int]:
    """Projected gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.

    Returns (u, value, tangent gradient norm, iterations). Without ``strict``
    the iterate reached at the cap is returned instead of raising.
    """
    u = u0.copy()
    value, grad = objective(u)
    p = _tangent(grad)
    step = 1.0
    for iteration in range(max_iter):
        norm = float(np.linalg.norm(p))
        if norm <= tol:
            return u, value, norm, iteration
        trial_step = step
        while True:
            trial = u - trial_step * p
            trial_value, trial_grad = objective(trial)
            if trial_value <= value - armijo_c * trial_step * norm * norm:
                break
            trial_step *= 0.5
            if trial_step < BB_STEP_MIN:
                # no representable decrease left along the gradient
                return u, value, norm, iteration
        trial_p = _tangent(trial_grad)
        s = trial - u
        y = trial_p - p
        sy = float(s @ y)
        step = float(np.clip(s @ s / sy, BB_STEP_MIN, BB_STEP_MAX)) if sy > 0 else 2.0 * trial_step
        u, value, grad, p = trial, trial_value, trial_grad, trial_p
    if not strict:
        return u, value, float(np.linalg.norm(p)), max_iter
    raise OracleFailureException(f"projected descent did not reach {tol:.1e} in {max_iter} iterations")


def split_objective(
    u_prev: np.ndarray,
    h_next: np.ndarray,
    params: ModelParams,
    ops: DenseOperators,
    potential=DEFAULT_POTENTIAL,
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """Value and gradient of the convex-split Cahn-Hilliard functional, densely."""
    eps, tau = params.eps, params.tau
    _, _, _, dw2_prev = eval_split(potential, u_prev)
    linear = ops.m * dw2_prev / eps - ops.K_L @ h_next
    H_minus = ops.M @ ops.K_plus @ ops.M

    def objective(u: np.ndarray) -> Tuple[float, np.ndarray]:
        v = u - u_prev
        w1, _, dw1, _ = eval_split(potential, u)
        Hv = H_minus @ v
        value = 0.5 / tau * v @ Hv + 0.5 * eps * u @ ops.K @ u + ops.m @ w1 / eps + linear @ u
        grad = Hv / tau + eps * ops.K @ u + ops.m * dw1 / eps + linear
        return float(value), grad

    return objective


def minimize_J_direct(
    u_prev: np.ndarray,
    h_next: np.ndarray,
    params: ModelParams,
    mesh: TorusMesh,
    config: OracleConfig,
    potential=DEFAULT_POTENTIAL,
) -> np.ndarray:
    """Minimizer of the Cahn-Hilliard step functional on {<u, 1>_h = <u_prev, 1>_h}."""
    _check_size(mesh, config)
    ops = dense_operators(mesh, params)
    objective = split_objective(np.asarray(u_prev, dtype=float), h_next, params, ops, potential)
    u, value, norm, iterations = _projected_descent(
        objective, np.asarray(u_prev, dtype=float), config.tol, config.max_iter, settings.armijo_c
    )
    if norm > config.tol:
        raise OracleFailureException(f"projected descent stalled at tangent gradient {norm:.3e}")
    logger.debug(f"Split oracle converged in {iterations} iterations, J={value:.12e}")
    return u


def minimize_Jn_coupled(
    u_prev: np.ndarray,
    h_prev: np.ndarray,
    params: ModelParams,
    mesh: TorusMesh,
    config: OracleConfig,
    potential=DEFAULT_POTENTIAL,
    inner_iter: int = 50,
) -> CoupledOracleResult:
    """Stationary point of the unsplit, undecoupled minimizing-movement functional.

    Alternates an exact quadratic solve in h with projected descent in u.
    """
    _check_size(mesh, config)
    if params.tau > COUPLED_TAU_MAX:
        raise PreconditionException(f"coupled oracle needs tau <= {COUPLED_TAU_MAX}, got {params.tau}")
    eps, tau, kappa = params.eps, params.tau, params.kappa
    ops = dense_operators(mesh, params)
    u_prev = np.asarray(u_prev, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    M_inv_K = np.linalg.solve(ops.M, ops.K)
    bending = kappa * ops.K @ M_inv_K
    H_minus = ops.M @ ops.K_plus @ ops.M
    h_matrix = ops.M / tau + ops.K_G + bending

    def value_of(u: np.ndarray, h: np.ndarray) -> float:
        v = u - u_prev
        dh = h - h_prev
        w1, w2, _, _ = eval_split(potential, u)
        return float(
            0.5 / tau * v @ H_minus @ v
            + 0.5 / tau * dh @ ops.M @ dh
            + ops.m @ (w1 + w2) / eps
            + 0.5 * eps * u @ ops.K @ u
            + 0.5 * h @ ops.K_G @ h
            + 0.5 * h @ bending @ h
            - u @ ops.K_L @ h
        )

    def u_gradient(u: np.ndarray, h: np.ndarray) -> np.ndarray:
        _, _, dw1, dw2 = eval_split(potential, u)
        return H_minus @ (u - u_prev) / tau + eps * ops.K @ u + ops.m * (dw1 + dw2) / eps - ops.K_L @ h

    def h_gradient(u: np.ndarray, h: np.ndarray) -> np.ndarray:
        return h_matrix @ h - ops.M @ h_prev / tau - ops.K_L @ u

    u = u_prev.copy()
    h = h_prev.copy()
    for sweep in range(config.max_iter):
        h = dense_solve(h_matrix, ops.M @ h_prev / tau + ops.K_L @ u)
        norm = float(np.hypot(np.linalg.norm(_tangent(u_gradient(u, h))), np.linalg.norm(h_gradient(u, h))))
        if norm <= config.tol:
            return CoupledOracleResult(
                u=u, h=h, g=M_inv_K @ h, value=value_of(u, h), gradient_norm=norm, sweeps=sweep
            )

        def objective(w: np.ndarray, h=h) -> Tuple[float, np.ndarray]:
            return value_of(w, h), u_gradient(w, h)

        u, _, _, _ = _projected_descent(objective, u, config.tol, inner_iter, settings.armijo_c, strict=False)
    raise OracleFailureException(f"coupled oracle did not converge in {config.max_iter} sweeps")


def dense_saddle_matrix(params: ModelParams, mesh: TorusMesh) -> np.ndarray:
    """The 2n^2 x 2n^2 height/curvature matrix, assembled densely."""
    _check_size(mesh)
    M = assemble_mass(mesh).toarray()
    K = assemble_stiffness(mesh).toarray()
    K_G = assemble_stiffness(mesh, params.G).toarray()
    kappa = params.kappa
    return np.block([[M / params.tau + K_G, kappa * K], [kappa * K, -kappa * M]])


def saddle_dense_oracle(state: SimState, params: ModelParams, mesh: TorusMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Height and curvature of the next step by dense LU."""
    _check_size(mesh)
    N = mesh.vertex_count
    M = assemble_mass(mesh).toarray()
    K_L = assemble_stiffness(mesh, params.L, semidefinite=True).toarray()
    rhs = np.concatenate([M @ state.h / params.tau + K_L @ state.u, np.zeros(N)])
    x = dense_solve(dense_saddle_matrix(params, mesh), rhs)
    return x[:N], x[N:]
