import pytest
import numpy as np

from membrane.core.exceptions import PreconditionException
from membrane.domain.config import OracleConfig
from membrane.domain.potential import PolynomialPotential
from membrane.domain.state import SimState
from membrane.services.mesh_fe import build_torus_mesh
from membrane.services.oracle import (
    dense_operators,
    dense_saddle_matrix,
    minimize_J_direct,
    minimize_Jn_coupled,
    saddle_dense_oracle,
    split_objective,
)
from membrane.services.scheme import SolverOptions, ch_objective, ch_step, height_step


def _shift(field: np.ndarray, n: int) -> np.ndarray:
    """Translate a nodal field by one grid cell in x."""
    return np.roll(field.reshape(n, n), 1, axis=1).ravel()


@pytest.mark.integration
@pytest.mark.oracle
class TestSplitOracle:
    """Dense projected descent against the Newton-Krylov step."""

    def test_newton_step_matches_dense_minimizer(self, params, matrices8, mesh8, random_state, tight_options):
        config = OracleConfig(n=8)
        for _ in range(20):
            state = random_state()
            h, _, _ = height_step(state, params, matrices8, tight_options)
            u_newton, _, _ = ch_step(state, h, params, matrices8, options=tight_options)
            u_dense = minimize_J_direct(state.u, h, params, mesh8, config)

            assert np.abs(u_newton - u_dense).max() <= 1e-6

    def test_dense_objective_agrees_with_sparse(self, params, matrices8, mesh8, random_state, rng):
        state = random_state()
        h = 0.01 * rng.uniform(-1, 1, 64)
        objective = split_objective(state.u, h, params, dense_operators(mesh8, params))
        u = state.u + 0.05 * rng.uniform(-1, 1, 64)
        u += state.u.mean() - u.mean()
        value, _ = objective(u)

        assert value == pytest.approx(
            ch_objective(u, state, h, params, matrices8), rel=1e-9
        )

    def test_minimizer_keeps_mass(self, params, mesh8, random_state):
        state = random_state()
        u = minimize_J_direct(state.u, np.zeros(64), params, mesh8, OracleConfig(n=8))

        assert u.mean() == pytest.approx(state.u.mean(), abs=1e-13)

    def test_large_mesh_rejected(self, params):
        mesh = build_torus_mesh(32)

        with pytest.raises(PreconditionException):
            minimize_J_direct(np.zeros(1024), np.zeros(1024), params, mesh, OracleConfig(n=16))

    def test_config_caps_mesh_size(self):
        with pytest.raises(ValueError):
            OracleConfig(n=32)


@pytest.mark.integration
@pytest.mark.oracle
class TestSaddleOracle:
    """Dense LU on the height/curvature system."""

    def test_minres_matches_dense_lu(self, params, matrices8, mesh8, random_state):
        options = SolverOptions(minres_tol=1e-13)
        for _ in range(20):
            state = random_state(h_amplitude=0.05)
            h, g, _ = height_step(state, params, matrices8, options)
            h_dense, g_dense = saddle_dense_oracle(state, params, mesh8)

            assert np.abs(h - h_dense).max() <= 1e-8 * max(1.0, np.abs(h_dense).max())
            assert np.abs(g - g_dense).max() <= 1e-8 * max(1.0, np.abs(g_dense).max())

    def test_dense_matrix_matches_block_operator(self, params, matrices8, mesh8):
        dense = dense_saddle_matrix(params, mesh8)

        np.testing.assert_allclose(dense, matrices8.saddle.to_dense(), atol=1e-12 * np.abs(dense).max())

    def test_translation_invariance(self, params, mesh8, random_state):
        """Shifting the data by one cell shifts the solution by one cell."""
        state = random_state(h_amplitude=0.05)
        shifted = SimState.from_fields(_shift(state.u, 8), _shift(state.h, 8))
        h, g = saddle_dense_oracle(state, params, mesh8)
        h_shifted, g_shifted = saddle_dense_oracle(shifted, params, mesh8)

        scale = max(np.abs(h).max(), np.abs(g).max())
        assert np.abs(h_shifted - _shift(h, 8)).max() <= 1e-9 * scale
        assert np.abs(g_shifted - _shift(g, 8)).max() <= 1e-9 * scale

    def test_large_mesh_rejected(self, params):
        with pytest.raises(PreconditionException):
            dense_saddle_matrix(params, build_torus_mesh(32))


@pytest.mark.integration
@pytest.mark.oracle
class TestCoupledOracle:
    """Unsplit, undecoupled minimizing movement by alternating minimization."""

    def test_constant_equilibrium_is_fixed(self, uncoupled_params, mesh8):
        """At a critical point of W with flat membrane nothing moves."""
        spec = PolynomialPotential(a4=1.0, a2=2.0)
        result = minimize_Jn_coupled(np.ones(64), np.zeros(64), uncoupled_params, mesh8, OracleConfig(n=8), spec)

        np.testing.assert_allclose(result.u, 1.0, rtol=1e-14)
        np.testing.assert_allclose(result.h, 0.0, atol=1e-14)
        assert result.sweeps == 0

    def test_reaches_stationary_point(self, params, mesh8, random_state):
        state = random_state(h_amplitude=0.02)
        config = OracleConfig(n=8, tol=1e-8)
        result = minimize_Jn_coupled(state.u, state.h, params, mesh8, config)

        assert result.gradient_norm <= 1e-8
        assert result.u.mean() == pytest.approx(state.u.mean(), abs=1e-12)
        assert np.isfinite(result.value)

    def test_large_time_step_rejected(self, params, mesh8):
        with pytest.raises(PreconditionException):
            minimize_Jn_coupled(np.zeros(64), np.zeros(64), params.with_tau(0.1), mesh8, OracleConfig(n=8))
