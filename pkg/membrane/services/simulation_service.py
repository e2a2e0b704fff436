"""Single simulation runs: initial data, time loop, diagnostics and snapshots."""
import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from pydantic import Field

from membrane.core.dependencies import get_matrices, get_mesh
from membrane.core.exceptions import BaseSimulationException
from membrane.domain.base import BaseSchema
from membrane.domain.config import RunConfig
from membrane.domain.mesh import TorusMesh
from membrane.domain.params import ModelParams
from membrane.domain.state import EnergyBreakdown, PatternMetrics, SimState, StepStats
from membrane.repositories.config_repository import serialize_config
from membrane.repositories.diagnostics_repository import DiagnosticsRepository, diagnostics_row
from membrane.repositories.field_repository import FieldRepository
from membrane.services.base import BaseService
from membrane.services.diagnostics import discrete_energy, pattern_metrics
from membrane.services.initialization import init_fields
from membrane.services.operators import SchemeMatrices
from membrane.services.scheme import SolverOptions, advance

logger = logging.getLogger(__name__)

StepObserver = Callable[[SimState, StepStats], None]


class RunContext(BaseSchema):
    """Everything derived from a RunConfig that stays fixed during the run."""

    mesh: TorusMesh
    params: ModelParams
    matrices: SchemeMatrices
    potential: object
    options: SolverOptions

    @classmethod
    def from_config(cls, config: RunConfig) -> "RunContext":
        params = config.model_params()
        matrices = get_matrices(config.mesh.n, params, config.solver.poisson)
        return cls(
            mesh=get_mesh(config.mesh.n),
            params=params,
            matrices=matrices,
            potential=config.potential.to_spec(),
            options=SolverOptions.from_section(config.solver),
        )


class FailureRecord(BaseSchema):
    step: int
    time: float
    error: str
    detail: str


class SimulationResult(BaseSchema):
    """Outcome of one run with the paths of everything it wrote."""

    run_dir: str
    steps_completed: int = Field(ge=0)
    final_time: float
    energy: EnergyBreakdown
    metrics: PatternMetrics
    failed: bool = False
    failure: Optional[FailureRecord] = None
    artifacts: List[str] = Field(default_factory=list)


def evolve(
    context: RunContext,
    state: SimState,
    steps: int,
    on_step: Optional[StepObserver] = None,
) -> SimState:
    """Advance ``steps`` time steps; the observer sees every new state."""
    for _ in range(steps):
        state, stats = advance(state, context.params, context.matrices, context.potential, context.options)
        if on_step is not None:
            on_step(state, stats)
    return state


class SimulationService(BaseService[RunConfig, SimulationResult]):
    """Runs one configuration and writes its artifact set."""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir
        super().__init__(DiagnosticsRepository(output_dir or "."))

    def _validate_config(self, config: RunConfig) -> None:
        formats = set(config.output.formats)
        if not formats:
            logger.warning("No output formats requested; only the failure record would be written")

    def _execute(self, config: RunConfig) -> SimulationResult:
        run_dir = Path(self.output_dir or config.output.dir)
        self.repository = DiagnosticsRepository(run_dir)
        fields = FieldRepository(run_dir)
        self.repository.ensure_dir()
        self.repository.write_text("config.cfg", serialize_config(config))

        context = RunContext.from_config(config)
        n = config.mesh.n
        formats = config.output.formats
        every = config.output.every_steps
        total = config.step_count
        logger.info(f"Simulating n={n}, tau={config.time.tau}, {total} steps into {run_dir}")

        state = init_fields(config, context.mesh)
        rows = [self._row(state, StepStats(), context)]
        artifacts = [str(p) for p in fields.write_snapshot(state, n, formats, self._stem(state))]
        failure = None
        last: Tuple[SimState, StepStats] = (state, StepStats())

        def record(new_state: SimState, stats: StepStats):
            nonlocal last
            last = (new_state, stats)
            if new_state.step % every == 0 or new_state.step == total:
                rows.append(self._row(new_state, stats, context))
                artifacts.extend(str(p) for p in fields.write_snapshot(new_state, n, formats, self._stem(new_state)))

        try:
            evolve(context, state, total, record)
        except BaseSimulationException as e:
            good, _ = last
            failure = FailureRecord(step=good.step + 1, time=good.time, error=type(e).__name__, detail=e.detail)
            logger.error(f"Step {good.step + 1} failed: {e.detail}")
            artifacts.append(str(self.repository.write_text("failure.json", failure.model_dump_json(indent=2))))
            artifacts.extend(str(p) for p in fields.write_snapshot(good, n, ["raw"], "last_good"))

        state, _ = last
        if "csv" in formats or failure is not None:
            artifacts.append(str(self.repository.write_diagnostics(rows)))
        energy = discrete_energy(state, context.params, context.matrices, context.potential)
        metrics = pattern_metrics(state.u)
        logger.info(
            f"Run finished at step {state.step}: E={energy.e_total:.10e}, pattern={metrics.label}, "
            f"{len(artifacts)} artifacts"
        )
        return SimulationResult(
            run_dir=str(run_dir),
            steps_completed=state.step,
            final_time=state.time,
            energy=energy,
            metrics=metrics,
            failed=failure is not None,
            failure=failure,
            artifacts=artifacts,
        )

    @staticmethod
    def _stem(state: SimState) -> str:
        return f"step_{state.step:06d}"

    @staticmethod
    def _row(state: SimState, stats: StepStats, context: RunContext) -> dict:
        energy = discrete_energy(state, context.params, context.matrices, context.potential)
        return diagnostics_row(
            state.step,
            state.time,
            context.matrices.integral(state.u),
            context.matrices.integral(state.h),
            energy,
            stats,
        )


def run_simulation(config: RunConfig, output_dir: Optional[str] = None) -> SimulationResult:
    return SimulationService(output_dir).run(config)
