import pytest
import numpy as np

from membrane.core.exceptions import SolverFailureException
from membrane.domain.config import SolverSection
from membrane.domain.potential import DEFAULT_POTENTIAL, PolynomialPotential
from membrane.domain.state import SimState
from membrane.services.diagnostics import discrete_energy, step_dissipation
from membrane.services.operators import assemble_matrices, saddle_for
from membrane.services.potentials import potential_prime
from membrane.services.scheme import (
    SolverOptions,
    advance,
    ch_gradient,
    ch_objective,
    ch_step,
    coefficient_bounds,
    height_step,
    model_params_from_isotropic,
    residual_weak_form,
)


@pytest.fixture(scope="module")
def uncoupled8(mesh8, uncoupled_params):
    return assemble_matrices(mesh8, uncoupled_params)


def _residual_norm(r1, r2) -> float:
    return float(np.sqrt(r1 @ r1 + r2 @ r2))


@pytest.mark.unit
@pytest.mark.scheme
class TestSolverOptions:
    """Step tolerances drawn from settings and run-file overrides."""

    def test_defaults_from_settings(self):
        options = SolverOptions()

        assert options.newton_tol == 1e-9
        assert options.minres_tol == 1e-10
        assert options.inner_tol == pytest.approx(options.cg_tol * options.inner_tol_factor)

    def test_section_overrides(self):
        options = SolverOptions.from_section(SolverSection(newton_tol=1e-8, poisson="factorized"))

        assert options.newton_tol == 1e-8
        assert options.cg_tol == 1e-10

    def test_isotropic_constructor_and_bounds(self):
        params = model_params_from_isotropic(eps=0.01, kappa=0.02, sigma=2.0, Lambda=0.5, tau=1e-3)

        assert params.sigma == 2.0
        assert params.Lambda == 0.5
        assert coefficient_bounds(params) == pytest.approx((2.0, 2.0, 0.5, 0.5))


@pytest.mark.unit
@pytest.mark.scheme
class TestHeightStep:
    """Saddle-point solve for membrane height and curvature."""

    def test_zero_data_gives_zero(self, mesh8, uncoupled_params, uncoupled8):
        """No coupling and flat membrane: nothing moves."""
        state = SimState.from_fields(np.full(64, 0.3), np.zeros(64))
        h, g, stats = height_step(state, uncoupled_params, uncoupled8)

        assert np.all(h == 0.0)
        assert np.all(g == 0.0)
        assert stats.minres_iterations == 0

    def test_height_mass_conserved(self, params, matrices8, random_state):
        state = random_state(h_amplitude=0.05)
        h, _, _ = height_step(state, params, matrices8)

        assert matrices8.integral(h) == pytest.approx(matrices8.integral(state.h), abs=1e-14)

    def test_curvature_is_discrete_laplacian(self, params, matrices8, random_state):
        """M g = K h up to the solver tolerance."""
        state = random_state()
        h, g, _ = height_step(state, params, matrices8, SolverOptions(minres_tol=1e-13))

        np.testing.assert_allclose(matrices8.M @ g, matrices8.K @ h, atol=1e-10 * max(1.0, np.abs(g).max()))

    def test_iteration_cap_raises(self, params, matrices8, random_state):
        with pytest.raises(SolverFailureException):
            height_step(random_state(), params, matrices8, SolverOptions(minres_tol=1e-30, max_krylov=2))

    def test_saddle_rebuilt_for_other_time_step(self, params, matrices8):
        """A different tau gives a different operator."""
        other = saddle_for(matrices8, params.with_tau(1e-3))

        assert other is not matrices8.saddle
        assert saddle_for(matrices8, params) is matrices8.saddle


@pytest.mark.unit
@pytest.mark.scheme
class TestCahnHilliardStep:
    """Damped Newton on the convex Cahn-Hilliard step functional."""

    def test_constant_state_is_fixed_point(self, mesh8, uncoupled_params, uncoupled8):
        """L = 0 and constant u: u stays, mu = W'(m)/eps with W2' taken at the old state."""
        spec = PolynomialPotential(a4=1.0, a2=2.0)
        m = 0.3
        state = SimState.from_fields(np.full(64, m), np.zeros(64))
        u, mu, stats = ch_step(state, np.zeros(64), uncoupled_params, uncoupled8, spec)

        np.testing.assert_allclose(u, m, rtol=1e-14)
        np.testing.assert_allclose(mu, potential_prime(spec, m) / uncoupled_params.eps, rtol=1e-10)
        assert stats.newton_iterations == 0

    def test_mass_conserved(self, params, matrices8, random_state):
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        u, _, _ = ch_step(state, h, params, matrices8)

        assert matrices8.integral(u) == pytest.approx(matrices8.integral(state.u), abs=1e-14)

    def test_output_satisfies_weak_form(self, params, matrices8, random_state):
        """The returned pair solves both equations to the Newton tolerance."""
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        u, mu, _ = ch_step(state, h, params, matrices8)
        r1, r2 = residual_weak_form(u, mu, h, state, params, matrices8)

        assert _residual_norm(r1, r2) <= SolverOptions().newton_tol

    def test_perturbed_solution_has_larger_residual(self, params, matrices8, random_state):
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        u, mu, _ = ch_step(state, h, params, matrices8)
        bumped = u.copy()
        bumped[17] += 1e-3

        exact = _residual_norm(*residual_weak_form(u, mu, h, state, params, matrices8))
        perturbed = _residual_norm(*residual_weak_form(bumped, mu, h, state, params, matrices8))
        assert perturbed > exact

    def test_minimizer_independent_of_initial_guess(self, params, matrices8, random_state, rng):
        """Strict convexity: two starting points reach the same u."""
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        options = SolverOptions(newton_tol=1e-11)
        u_a, _, _ = ch_step(state, h, params, matrices8, options=options)
        u_b, _, _ = ch_step(
            state, h, params, matrices8, options=options, u_init=state.u + 0.1 * rng.uniform(-1, 1, 64)
        )

        np.testing.assert_allclose(u_a, u_b, atol=1e-8)

    def test_step_lowers_objective(self, params, matrices8, random_state):
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        u, _, _ = ch_step(state, h, params, matrices8)

        assert ch_objective(u, state, h, params, matrices8) <= ch_objective(state.u, state, h, params, matrices8)

    def test_newton_cap_raises(self, params, matrices8, random_state):
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)

        with pytest.raises(SolverFailureException):
            ch_step(state, h, params, matrices8, options=SolverOptions(max_newton=1, newton_tol=1e-30))

    def test_weak_form_matches_finite_differences(self, params, factorized8, random_state, rng):
        """Residual r2 is the gradient of J along mean-free directions."""
        state = random_state()
        h_new = 0.01 * rng.uniform(-1, 1, 64)
        tau, step = params.tau, 1e-4
        for _ in range(50):
            u = state.u + 0.05 * rng.uniform(-1, 1, 64)
            grad = ch_gradient(u, state, h_new, params, factorized8)
            z, _ = factorized8.poisson.solve(factorized8.M @ (u - state.u))
            mu = grad.sum() / factorized8.area - z / tau
            _, r2 = residual_weak_form(u, mu, h_new, state, params, factorized8)

            d = rng.uniform(-1, 1, 64)
            d -= d.mean()
            plus = ch_objective(u + step * d, state, h_new, params, factorized8)
            minus = ch_objective(u - step * d, state, h_new, params, factorized8)
            difference = (plus - minus) / (2 * step)
            analytic = float(r2 @ d)

            assert abs(difference - analytic) <= 1e-5 * max(1.0, abs(analytic))

    def test_moreau_yosida_variant_runs(self, params, matrices8, random_state):
        from membrane.domain.potential import MoreauYosidaPotential

        spec = MoreauYosidaPotential(lam=0.01, base=DEFAULT_POTENTIAL)
        state = random_state()
        h, _, _ = height_step(state, params, matrices8)
        u, mu, _ = ch_step(state, h, params, matrices8, spec)
        r1, r2 = residual_weak_form(u, mu, h, state, params, matrices8, spec)

        assert _residual_norm(r1, r2) <= SolverOptions().newton_tol


@pytest.mark.unit
@pytest.mark.scheme
class TestAdvance:
    """Full decoupled time step."""

    def test_uncoupled_constant_state_is_fixed_point(self, uncoupled_params, uncoupled8):
        state = SimState.from_fields(np.full(64, 0.2), np.zeros(64))
        nxt, stats = advance(state, uncoupled_params, uncoupled8)

        np.testing.assert_array_equal(nxt.u, state.u)
        np.testing.assert_array_equal(nxt.h, state.h)
        assert nxt.step == 1
        assert nxt.time == pytest.approx(uncoupled_params.tau)
        assert stats.energy_after == stats.energy_before

    def test_masses_conserved_over_steps(self, params, matrices8, random_state):
        state = random_state(h_amplitude=0.02)
        mass_u, mass_h = matrices8.integral(state.u), matrices8.integral(state.h)
        for _ in range(5):
            state, _ = advance(state, params, matrices8)

        assert matrices8.integral(state.u) == pytest.approx(mass_u, abs=1e-13)
        assert matrices8.integral(state.h) == pytest.approx(mass_h, abs=1e-13)

    def test_energy_inequality_each_step(self, params, matrices8, random_state):
        """E(next) plus both dissipations never exceeds E(prev)."""
        state = random_state(h_amplitude=0.0)
        for _ in range(5):
            nxt, stats = advance(state, params, matrices8)
            ledger = step_dissipation(state, nxt, params, matrices8, slack=1e-8)

            assert ledger.holds
            assert stats.energy_after <= stats.energy_before + 1e-8
            state = nxt

    def test_stats_are_recorded(self, params, matrices8, random_state):
        state = random_state()
        _, stats = advance(state, params, matrices8)

        assert stats.newton_iterations >= 1
        assert stats.minres_iterations >= 1
        assert stats.krylov_iterations >= stats.minres_iterations
        assert stats.energy_before == pytest.approx(discrete_energy(state, params, matrices8).e_total)

    def test_deterministic(self, params, matrices8, random_state):
        state = random_state()
        first, _ = advance(state, params, matrices8)
        second, _ = advance(state, params, matrices8)

        np.testing.assert_array_equal(first.u, second.u)
        np.testing.assert_array_equal(first.h, second.h)


@pytest.mark.slow
@pytest.mark.integration
@pytest.mark.scheme
class TestLongRunInvariants:
    """Mass and energy over a thousand steps at n = 32."""

    def test_mass_and_energy(self, params):
        from membrane.core.dependencies import get_matrices
        from membrane.services.initialization import uniform_draws

        matrices = get_matrices(32, params)
        N = matrices.mesh.vertex_count
        u = 0.1 + 0.2 * (2.0 * uniform_draws(1, N) - 1.0)
        u += 0.1 - u.mean()
        state = SimState.from_fields(u, np.zeros(N))
        mass_u = matrices.integral(state.u)
        mass_h = matrices.integral(state.h)
        energy = discrete_energy(state, params, matrices).e_total

        for _ in range(1000):
            state, stats = advance(state, params, matrices)
            assert stats.energy_after <= energy + 1e-8
            energy = stats.energy_after

        assert abs(matrices.integral(state.u) - mass_u) <= 1e-9 * abs(mass_u)
        assert abs(matrices.integral(state.h) - mass_h) <= 1e-9
