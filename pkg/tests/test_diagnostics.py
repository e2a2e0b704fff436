import pytest
import numpy as np

from membrane.core.exceptions import PreconditionException
from membrane.domain.params import ModelParams
from membrane.domain.potential import DEFAULT_POTENTIAL
from membrane.domain.state import PatternRules, SimState
from membrane.services.diagnostics import (
    coupling_instability,
    discrete_energy,
    energy_terms,
    h_minus_one_norm,
    l2_norm_h,
    pattern_metrics,
    step_dissipation,
)
from membrane.services.mesh_fe import build_torus_mesh
from membrane.services.operators import assemble_matrices
from membrane.services.potentials import potential
from membrane.services.scheme import advance


def _stripes(n: int, width: int) -> np.ndarray:
    i = np.arange(n * n) % n
    return np.where((i // width) % 2 == 0, 1.0, -1.0)


def _dots(n: int, spacing: int, sign: float = 1.0) -> np.ndarray:
    u = -sign * np.ones(n * n)
    for a in range(0, n, spacing):
        for b in range(0, n, spacing):
            u[(a + 1) + (b + 1) * n] = sign
    return u


@pytest.mark.unit
@pytest.mark.diagnostics
class TestEnergy:
    """Discrete energy and its per-step ledger."""

    def test_zero_fields_have_zero_energy(self, params, matrices8):
        zeros = np.zeros(64)
        terms = energy_terms(zeros, zeros, zeros, params, matrices8)

        assert terms.e_total == 0.0

    def test_constant_order_parameter(self, params, matrices8):
        """u = m, h = g = 0 leaves only |Omega| W(m) / eps."""
        m = 0.3
        state = SimState.from_fields(np.full(64, m), np.zeros(64))
        terms = discrete_energy(state, params, matrices8)

        assert terms.e_total == pytest.approx(potential(DEFAULT_POTENTIAL, m) / params.eps, rel=1e-12)
        assert terms.e_grad_u == pytest.approx(0.0, abs=1e-14)
        assert terms.e_coupling == pytest.approx(0.0, abs=1e-14)

    def test_terms_add_up(self, params, matrices8, random_state):
        state = random_state()
        terms = discrete_energy(state, params, matrices8)

        parts = terms.e_potential + terms.e_grad_u + terms.e_surface + terms.e_bend + terms.e_coupling
        assert terms.e_total == pytest.approx(parts, rel=1e-14)
        assert terms.e_surface >= 0
        assert terms.e_grad_u >= 0

    def test_ledger_holds_for_a_step(self, params, matrices8, random_state):
        state = random_state(h_amplitude=0.0)
        nxt, _ = advance(state, params, matrices8)
        ledger = step_dissipation(state, nxt, params, matrices8, slack=1e-8)

        assert ledger.holds
        assert ledger.numerical_dissipation >= 0
        assert ledger.physical_dissipation > 0
        assert ledger.energy_after < ledger.energy_before

    def test_ledger_fails_for_reversed_step(self, params, matrices8, random_state):
        """Running a step backwards raises the energy, so the inequality breaks."""
        state = random_state(h_amplitude=0.0)
        nxt, _ = advance(state, params, matrices8)

        assert not step_dissipation(nxt, state, params, matrices8).holds


@pytest.mark.unit
@pytest.mark.diagnostics
class TestCouplingInstability:
    """Lambda^2 > sigma * eps predicts pattern formation."""

    @pytest.mark.parametrize(
        "sigma,Lambda,expected",
        [(1.0, 0.6, True), (10.0, 0.2, False), (1.0, 0.0, False), (0.01, 0.2, True)],
    )
    def test_isotropic(self, sigma, Lambda, expected):
        params = ModelParams.isotropic(eps=0.01, kappa=0.002, sigma=sigma, Lambda=Lambda, tau=1e-4)

        assert coupling_instability(params) is expected

    def test_anisotropic_uses_extreme_eigenvalues(self):
        """Smallest coupling against largest tension."""
        weak = ModelParams(eps=0.01, kappa=0.01, tau=1e-4, G=np.diag([1.0, 2.0]), L=np.diag([0.1, 0.5]))
        strong = ModelParams(eps=0.01, kappa=0.01, tau=1e-4, G=np.diag([1.0, 2.0]), L=np.diag([0.2, 0.5]))

        assert not coupling_instability(weak)
        assert coupling_instability(strong)


@pytest.mark.unit
@pytest.mark.diagnostics
class TestNorms:
    def test_l2_norm_of_constant(self, matrices8):
        assert l2_norm_h(np.ones(64), matrices8) == pytest.approx(1.0, rel=1e-13)

    def test_h_minus_one_norm_of_sine(self, params):
        """||sin(2 pi x)||_{-1} = ||sin(2 pi x)||_0 / (2 pi) up to discretization error."""
        matrices = assemble_matrices(build_torus_mesh(64), params)
        x = matrices.mesh.coordinates[:, 0]
        v = np.sin(2 * np.pi * x)

        expected = l2_norm_h(v, matrices) / (2 * np.pi)
        assert h_minus_one_norm(v, matrices, tol=1e-12) == pytest.approx(expected, rel=1e-2)

    def test_h_minus_one_norm_needs_mean_free_field(self, matrices8):
        with pytest.raises(PreconditionException):
            h_minus_one_norm(np.ones(64), matrices8)


@pytest.mark.unit
@pytest.mark.diagnostics
class TestPatternMetrics:
    """Connected components of the thresholded order parameter on the periodic grid."""

    def test_stripes(self):
        """Two bands that close around the torus."""
        metrics = pattern_metrics(_stripes(32, 8))

        assert metrics.component_count == 2
        assert metrics.mean_elongation == PatternRules().wrap_elongation
        assert metrics.area_fraction == pytest.approx(0.5)
        assert metrics.label == "stripes"

    def test_dots(self):
        metrics = pattern_metrics(_dots(16, 4))

        assert metrics.component_count == 16
        assert metrics.mean_elongation == pytest.approx(np.sqrt(2.0))
        assert metrics.label == "dots"
        assert metrics.analyzed_phase == "upper"

    def test_minority_phase_dots(self):
        """Holes in a majority phase are counted as dots of the lower phase."""
        metrics = pattern_metrics(_dots(16, 4, sign=-1.0))

        assert metrics.label == "dots"
        assert metrics.analyzed_phase == "lower"
        assert metrics.component_count == 16
        assert metrics.area_fraction == pytest.approx(240 / 256)

    def test_area_fraction_is_upper_phase_when_minority_is_analyzed(self):
        """Bands covering 5/8 of the torus: the narrow lower bands are analyzed."""
        n = 16
        u = np.where(np.arange(n * n) % 8 < 5, 1.0, -1.0)
        metrics = pattern_metrics(u)

        assert metrics.analyzed_phase == "lower"
        assert metrics.area_fraction == pytest.approx(0.625)
        assert metrics.component_count == 2
        assert metrics.label == "stripes"

    def test_dot_crossing_the_seam_is_one_component(self):
        """A 2x2 block split across the periodic boundary stays one dot."""
        n = 16
        u = -np.ones(n * n)
        for i, j in [(15, 15), (0, 15), (15, 0), (0, 0)]:
            u[i + j * n] = 1.0
        for a in range(4, 16, 4):
            u[a + 8 * n] = 1.0
            u[8 + a * n] = 1.0
        metrics = pattern_metrics(u)

        assert metrics.component_count == 6
        assert metrics.label == "dots"

    @pytest.mark.parametrize("value", [1.0, -1.0])
    def test_homogeneous(self, value):
        assert pattern_metrics(np.full(256, value)).label == "homogeneous"

    def test_threshold_shifts_the_mask(self):
        metrics = pattern_metrics(np.full(64, 0.3), threshold=0.5)

        assert metrics.component_count == 0
        assert metrics.label == "homogeneous"

    def test_non_square_array_rejected(self):
        with pytest.raises(PreconditionException):
            pattern_metrics(np.zeros(50))

    def test_translation_invariant(self, rng):
        """Shifting the field around the torus does not change the metrics."""
        n = 16
        u = np.where(rng.uniform(size=n * n) < 0.2, 1.0, -1.0)
        shifted = np.roll(np.roll(u.reshape(n, n), 3, axis=0), 5, axis=1).ravel()

        original, moved = pattern_metrics(u), pattern_metrics(shifted)

        assert moved.component_count == original.component_count
        assert moved.label == original.label
        assert moved.area_fraction == original.area_fraction
        assert moved.mean_elongation == pytest.approx(original.mean_elongation, rel=1e-12)


@pytest.mark.unit
@pytest.mark.diagnostics
def test_discrete_poincare_bound(params, rng):
    """||v||_{-1} <= (1 + 5%) ||v||_0 / (2 pi) for mean-free v."""
    matrices = assemble_matrices(build_torus_mesh(32), params)
    for _ in range(5):
        v = rng.normal(size=1024)
        v -= v.mean()

        assert h_minus_one_norm(v, matrices, tol=1e-12) <= 1.05 * l2_norm_h(v, matrices) / (2 * np.pi)
