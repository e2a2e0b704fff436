from typing import List, Literal, Optional

import numpy as np
from pydantic import Field

from membrane.domain.base import BaseSchema, FrozenSchema


class SimState(BaseSchema):
    """Nodal fields of one time level."""

    u: np.ndarray
    mu: np.ndarray
    h: np.ndarray
    g: np.ndarray
    step: int = 0
    time: float = 0.0

    @classmethod
    def from_fields(cls, u: np.ndarray, h: np.ndarray, step: int = 0, time: float = 0.0) -> "SimState":
        u = np.array(u, dtype=float)
        return cls(
            u=u,
            mu=np.zeros_like(u),
            h=np.array(h, dtype=float),
            g=np.zeros_like(u),
            step=step,
            time=time,
        )

    def copy(self) -> "SimState":
        return SimState(
            u=self.u.copy(),
            mu=self.mu.copy(),
            h=self.h.copy(),
            g=self.g.copy(),
            step=self.step,
            time=self.time,
        )


class SolveReport(BaseSchema):
    """Outcome of one Krylov solve."""

    iterations: int = 0
    residual_norm: float = 0.0
    converged: bool = True
    residual_history: List[float] = Field(default_factory=list)


class StepStats(BaseSchema):
    """Solver statistics of one (sub)step."""

    newton_iterations: int = 0
    outer_krylov_iterations: int = 0
    inner_krylov_iterations: int = 0
    minres_iterations: int = 0
    newton_residual: float = 0.0
    minres_residual: float = 0.0
    line_search_halvings: int = 0
    energy_before: Optional[float] = None
    energy_after: Optional[float] = None

    @property
    def krylov_iterations(self) -> int:
        return self.outer_krylov_iterations + self.inner_krylov_iterations + self.minres_iterations

    def merge(self, other: "StepStats") -> "StepStats":
        """Combine the statistics of the height and Cahn-Hilliard substeps."""
        return StepStats(
            newton_iterations=self.newton_iterations + other.newton_iterations,
            outer_krylov_iterations=self.outer_krylov_iterations + other.outer_krylov_iterations,
            inner_krylov_iterations=self.inner_krylov_iterations + other.inner_krylov_iterations,
            minres_iterations=self.minres_iterations + other.minres_iterations,
            newton_residual=max(self.newton_residual, other.newton_residual),
            minres_residual=max(self.minres_residual, other.minres_residual),
            line_search_halvings=self.line_search_halvings + other.line_search_halvings,
            energy_before=self.energy_before if self.energy_before is not None else other.energy_before,
            energy_after=other.energy_after if other.energy_after is not None else self.energy_after,
        )


class EnergyBreakdown(BaseSchema):
    """Discrete energy, term by term."""

    e_potential: float
    e_grad_u: float
    e_surface: float
    e_bend: float
    e_coupling: float
    e_total: float


class DissipationLedger(BaseSchema):
    """Both sides of the per-step discrete energy inequality."""

    energy_before: float
    energy_after: float
    numerical_dissipation: float
    physical_dissipation: float
    slack: float
    holds: bool


PatternLabel = Literal["stripes", "dots", "mixed", "homogeneous"]


class PatternMetrics(BaseSchema):
    """Connected-component statistics of a thresholded order parameter."""

    component_count: int = Field(ge=0)
    area_fraction: float = Field(ge=0.0, le=1.0)
    mean_elongation: float
    label: PatternLabel
    analyzed_phase: Literal["upper", "lower"] = "upper"


class PatternRules(FrozenSchema):
    """Thresholds separating the pattern regimes."""

    homogeneous_upper: float = Field(default=0.95, gt=0.5, le=1.0)
    homogeneous_lower: float = Field(default=0.05, ge=0.0, lt=0.5)
    dots_min_count: int = Field(default=5, ge=1)
    dots_max_elongation: float = Field(default=2.0, gt=1.0)
    stripes_min_elongation: float = Field(default=3.0, gt=1.0)
    wrap_elongation: float = Field(default=10.0, gt=1.0)
