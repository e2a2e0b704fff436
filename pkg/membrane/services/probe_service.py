"""Empirical probes run on top of the simulator: continuous dependence and the instability screen."""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import Field

from membrane.domain.base import BaseSchema
from membrane.domain.config import RunConfig
from membrane.domain.state import SimState
from membrane.services.diagnostics import coupling_instability, h_minus_one_norm, l2_norm_h
from membrane.services.initialization import init_fields
from membrane.services.simulation_service import RunContext, evolve

logger = logging.getLogger(__name__)


class DependenceRow(BaseSchema):
    delta: float = Field(ge=0)
    distance: float = Field(ge=0)
    ratio: Optional[float] = None


class DependenceTable(BaseSchema):
    """D(delta) = |u2 - u1|_{-1}^2 + |h2 - h1|_{L2}^2 at the final time, and D / delta^2."""

    final_time: float
    rows: List[DependenceRow]

    def distance(self, delta: float) -> float:
        for row in self.rows:
            if row.delta == delta:
                return row.distance
        raise KeyError(delta)


class InstabilityScreen(BaseSchema):
    initial_deviation: float
    final_deviation: float
    predicted_unstable: bool

    @property
    def grew(self) -> bool:
        return self.final_deviation > self.initial_deviation

    @property
    def consistent(self) -> bool:
        return self.grew == self.predicted_unstable


def default_profile(coordinates: np.ndarray) -> np.ndarray:
    """Fixed mean-free perturbation cos(2 pi x) cos(2 pi y)."""
    x, y = coordinates[:, 0], coordinates[:, 1]
    profile = np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    return profile - profile.mean()


def continuous_dependence_probe(
    config: RunConfig,
    deltas: Sequence[float],
    profile: Optional[np.ndarray] = None,
) -> DependenceTable:
    """Paired runs from u0 and u0 + delta * profile."""
    context = RunContext.from_config(config)
    base = init_fields(config, context.mesh)
    profile = default_profile(context.mesh.coordinates) if profile is None else np.asarray(profile, dtype=float)
    steps = config.step_count

    reference = evolve(context, base, steps)
    rows = []
    for delta in deltas:
        perturbed = SimState.from_fields(base.u + delta * profile, base.h)
        final = evolve(context, perturbed, steps)
        du = final.u - reference.u
        du = du - context.matrices.discrete_mean(du)
        distance = h_minus_one_norm(du, context.matrices) ** 2 + l2_norm_h(final.h - reference.h, context.matrices) ** 2
        ratio = distance / delta ** 2 if delta > 0 else None
        logger.info(f"Dependence probe delta={delta:.3e}: D={distance:.6e}")
        rows.append(DependenceRow(delta=delta, distance=distance, ratio=ratio))
    return DependenceTable(final_time=reference.time, rows=rows)


def instability_screen(config: RunConfig) -> InstabilityScreen:
    """Compare |u - m|_{L2} at t = 0 and t = t_end against the Lambda^2 > sigma*eps prediction."""
    context = RunContext.from_config(config)
    state = init_fields(config, context.mesh)
    mean = config.init.mean_u
    initial = l2_norm_h(state.u - mean, context.matrices)
    final_state = evolve(context, state, config.step_count)
    final = l2_norm_h(final_state.u - mean, context.matrices)
    screen = InstabilityScreen(
        initial_deviation=initial,
        final_deviation=final,
        predicted_unstable=coupling_instability(context.params),
    )
    if not screen.consistent:
        logger.warning(
            f"Instability screen advisory: deviation {initial:.3e} -> {final:.3e}, "
            f"predicted {'growth' if screen.predicted_unstable else 'decay'}"
        )
    return screen
