"""One time step of the decoupled scheme: height/curvature first, then Cahn-Hilliard.

The Cahn-Hilliard stage minimizes the strictly convex functional

    J(u) = 1/(2 tau) |u - u_prev|_{-1,h}^2 + eps/2 u.K.u
           + 1/eps sum_i m_i W1(u_i) + 1/eps sum_i m_i W2'(u_prev_i) u_i - (K_L h).u

on {<u, 1>_h = <u_prev, 1>_h} with a damped Newton method whose linear
systems are solved by matrix-free CG on the mean-free subspace.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import Field

from membrane.core.config import settings
from membrane.core.exceptions import SolverFailureException
from membrane.domain.base import FrozenSchema
from membrane.domain.config import SolverSection
from membrane.domain.params import ModelParams
from membrane.domain.potential import DEFAULT_POTENTIAL
from membrane.domain.state import SimState, StepStats
from membrane.services.diagnostics import discrete_energy
from membrane.services.operators import SchemeMatrices, saddle_for
from membrane.services.potentials import convex_curvature, eval_split
from membrane.services.sparse_linalg import cg_solve, minres_solve

logger = logging.getLogger(__name__)

# Armijo comparisons tolerate this many ulps of |J|
ROUNDOFF_ULPS = 10.0


class SolverOptions(FrozenSchema):
    """Tolerances and caps of one time step."""

    newton_tol: float = Field(default_factory=lambda: settings.newton_tol, gt=0)
    minres_tol: float = Field(default_factory=lambda: settings.minres_tol, gt=0)
    cg_tol: float = Field(default_factory=lambda: settings.cg_tol, gt=0)
    max_newton: int = Field(default_factory=lambda: settings.max_newton, ge=1)
    max_krylov: int = Field(default_factory=lambda: settings.max_krylov, ge=1)
    armijo_c: float = Field(default_factory=lambda: settings.armijo_c, gt=0, lt=1)
    min_step: float = Field(default_factory=lambda: settings.min_step, gt=0)
    inner_tol_factor: float = Field(default_factory=lambda: settings.inner_tol_factor, gt=0)

    @classmethod
    def from_section(cls, section: Optional[SolverSection]) -> "SolverOptions":
        """Run-file overrides on top of the process settings."""
        if section is None:
            return cls()
        return cls(**section.model_dump(exclude_none=True, exclude={"poisson"}))

    @property
    def inner_tol(self) -> float:
        return self.cg_tol * self.inner_tol_factor


def model_params_from_isotropic(eps: float, kappa: float, sigma: float, Lambda: float, tau: float) -> ModelParams:
    return ModelParams.isotropic(eps=eps, kappa=kappa, sigma=sigma, Lambda=Lambda, tau=tau)


def coefficient_bounds(params: ModelParams) -> Tuple[float, float, float, float]:
    return params.coefficient_bounds()


# -- height / curvature -------------------------------------------------------

def height_step(
    state: SimState,
    params: ModelParams,
    matrices: SchemeMatrices,
    options: Optional[SolverOptions] = None,
) -> Tuple[np.ndarray, np.ndarray, StepStats]:
    """Solve [[M/tau + K_G, kappa K], [kappa K, -kappa M]] (h, g) = (M h_prev/tau + K_L u_prev, 0)."""
    options = options or SolverOptions()
    N = matrices.mesh.vertex_count
    rhs = np.concatenate([
        matrices.M @ state.h / params.tau + matrices.K_L @ state.u,
        np.zeros(N),
    ])
    x, report = minres_solve(
        saddle_for(matrices, params), rhs, tol=options.minres_tol, max_iter=options.max_krylov
    )
    if not report.converged:
        raise SolverFailureException(
            f"MINRES stopped at relative residual {report.residual_norm:.3e} "
            f"after {report.iterations} iterations",
            report=report,
        )
    h, g = x[:N], x[N:]
    # the constant mode of h sees only M/tau, so a shift restores <h, 1>_h exactly
    h = h + (matrices.integral(state.h) - matrices.integral(h)) / matrices.area
    stats = StepStats(minres_iterations=report.iterations, minres_residual=report.residual_norm)
    return h, g, stats


# -- Cahn-Hilliard ------------------------------------------------------------

class ReducedProblem:
    """J on the mass-constraint space with its gradient, Hessian and multiplier."""

    def __init__(
        self,
        state: SimState,
        h_new: np.ndarray,
        params: ModelParams,
        matrices: SchemeMatrices,
        potential=DEFAULT_POTENTIAL,
        options: Optional[SolverOptions] = None,
    ):
        self.u_prev = state.u
        self.params = params
        self.matrices = matrices
        self.potential = potential
        self.options = options or SolverOptions()
        self.m = matrices.M_lumped
        _, _, _, dw2_prev = eval_split(potential, state.u)
        self.dw2_prev = dw2_prev
        self.linear = self.m * dw2_prev / params.eps - matrices.K_L @ h_new
        self.inner_iterations = 0

    def poisson(self, v: np.ndarray) -> np.ndarray:
        """K^+ M v for a mean-free increment v."""
        z, report = self.matrices.poisson.solve(self.matrices.M @ v, tol=self.options.inner_tol)
        self.inner_iterations += report.iterations
        if not report.converged:
            raise SolverFailureException(
                f"inner Poisson solve stopped at relative residual {report.residual_norm:.3e}",
                report=report,
            )
        return z

    def evaluate(self, u: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        """(J(u), K^+ M (u - u_prev), W1'(u))."""
        eps, tau = self.params.eps, self.params.tau
        v = u - self.u_prev
        z = self.poisson(v)
        w1, _, dw1, _ = eval_split(self.potential, u)
        value = (
            0.5 / tau * float((self.matrices.M @ v) @ z)
            + 0.5 * eps * self.matrices.K.quadratic_form(u)
            + float(self.m @ w1) / eps
            + float(self.linear @ u)
        )
        return value, z, dw1

    def gradient(self, u: np.ndarray, z: np.ndarray, dw1: np.ndarray) -> np.ndarray:
        eps, tau = self.params.eps, self.params.tau
        return (
            self.matrices.M @ z / tau
            + eps * (self.matrices.K @ u)
            + self.m * dw1 / eps
            + self.linear
        )

    def multiplier(self, grad: np.ndarray) -> float:
        """Lagrange multiplier of the mass constraint, fixed by testing with 1."""
        return float(grad.sum()) / self.matrices.area

    def hessian_operator(self, u: np.ndarray):
        eps, tau = self.params.eps, self.params.tau
        curvature = self.m * convex_curvature(self.potential, u) / eps
        K = self.matrices.K

        def apply(d: np.ndarray) -> np.ndarray:
            return self.matrices.M @ self.poisson(d) / tau + eps * (K @ d) + curvature * d

        diagonal = eps * K.diagonal() + curvature
        return apply, diagonal


def ch_objective(
    u: np.ndarray,
    state: SimState,
    h_new: np.ndarray,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
) -> float:
    value, _, _ = ReducedProblem(state, h_new, params, matrices, potential).evaluate(u)
    return value


def ch_gradient(
    u: np.ndarray,
    state: SimState,
    h_new: np.ndarray,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
) -> np.ndarray:
    """Unconstrained gradient of J at u."""
    problem = ReducedProblem(state, h_new, params, matrices, potential)
    _, z, dw1 = problem.evaluate(u)
    return problem.gradient(u, z, dw1)


def ch_step(
    state: SimState,
    h_new: np.ndarray,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
    options: Optional[SolverOptions] = None,
    u_init: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, StepStats]:
    """Newton with Armijo backtracking on J; returns (u, mu, stats)."""
    options = options or SolverOptions()
    problem = ReducedProblem(state, h_new, params, matrices, potential, options)
    tau = params.tau
    m = problem.m

    if u_init is None:
        u = state.u.copy()
    else:
        u = np.array(u_init, dtype=float)
        u += (matrices.integral(state.u) - matrices.integral(u)) / matrices.area

    value, z, dw1 = problem.evaluate(u)
    outer = 0
    halvings = 0
    iteration = 0
    while True:
        grad = problem.gradient(u, z, dw1)
        lam = problem.multiplier(grad)
        r2 = grad - lam * m
        mu = lam - z / tau
        r1 = (matrices.M @ (u - state.u) - matrices.K @ z) / tau
        residual = float(np.sqrt(r1 @ r1 + r2 @ r2))
        logger.debug(f"Newton {iteration}: J={value:.12e} residual={residual:.3e}")
        if residual <= options.newton_tol:
            break
        if iteration >= options.max_newton:
            raise SolverFailureException(
                f"Newton did not converge in {options.max_newton} iterations (residual {residual:.3e})",
                report=StepStats(newton_iterations=iteration, newton_residual=residual),
            )
        iteration += 1

        apply_hessian, diagonal = problem.hessian_operator(u)
        rhs = -(r2 - r2.mean())
        direction, report = cg_solve(
            apply_hessian,
            rhs,
            tol=options.cg_tol,
            max_iter=options.max_krylov,
            preconditioner=diagonal,
            project_mean=True,
        )
        outer += report.iterations
        slope = float(grad @ direction)
        if slope >= 0:
            logger.debug(f"Newton {iteration}: no descent (slope {slope:.3e}), using the projected gradient")
            direction = rhs
            slope = float(grad @ direction)

        step = 1.0
        allowance = ROUNDOFF_ULPS * np.finfo(float).eps * max(abs(value), 1.0)
        while True:
            trial = u + step * direction
            trial_value, trial_z, trial_dw1 = problem.evaluate(trial)
            if trial_value <= value + options.armijo_c * step * slope + allowance:
                break
            step *= 0.5
            halvings += 1
            if step < options.min_step:
                raise SolverFailureException(
                    f"line search failed at Newton iteration {iteration} (residual {residual:.3e})",
                    report=StepStats(newton_iterations=iteration, newton_residual=residual),
                )
        u, value, z, dw1 = trial, trial_value, trial_z, trial_dw1

    stats = StepStats(
        newton_iterations=iteration,
        outer_krylov_iterations=outer,
        inner_krylov_iterations=problem.inner_iterations,
        newton_residual=residual,
        line_search_halvings=halvings,
    )
    return u, mu, stats


def residual_weak_form(
    u_next: np.ndarray,
    mu_next: np.ndarray,
    h_next: np.ndarray,
    state: SimState,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
) -> Tuple[np.ndarray, np.ndarray]:
    """Residuals of the two Cahn-Hilliard equations against every nodal basis function."""
    _, _, dw1, _ = eval_split(potential, u_next)
    _, _, _, dw2 = eval_split(potential, state.u)
    r1 = matrices.M @ (u_next - state.u) / params.tau + matrices.K @ mu_next
    r2 = (
        -(matrices.M @ mu_next)
        + params.eps * (matrices.K @ u_next)
        + matrices.M_lumped * (dw1 + dw2) / params.eps
        - matrices.K_L @ h_next
    )
    return r1, r2


# -- full step ----------------------------------------------------------------

def advance(
    state: SimState,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
    options: Optional[SolverOptions] = None,
) -> Tuple[SimState, StepStats]:
    """Height step on u_prev, then the Cahn-Hilliard step on the new height."""
    options = options or SolverOptions()
    energy_before = discrete_energy(state, params, matrices, potential).e_total

    h, g, height_stats = height_step(state, params, matrices, options)
    u, mu, ch_stats = ch_step(state, h, params, matrices, potential, options)

    nxt = SimState(u=u, mu=mu, h=h, g=g, step=state.step + 1, time=state.time + params.tau)
    energy_after = discrete_energy(nxt, params, matrices, potential).e_total
    stats = height_stats.merge(ch_stats).model_copy(
        update={"energy_before": energy_before, "energy_after": energy_after}
    )
    logger.debug(
        f"Step {nxt.step}: newton={stats.newton_iterations} krylov={stats.krylov_iterations} "
        f"E={energy_after:.12e}"
    )
    return nxt, stats
