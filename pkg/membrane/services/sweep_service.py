"""Cartesian parameter sweeps, one run directory per grid cell."""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import Field

from membrane.core.exceptions import BaseSimulationException
from membrane.domain.base import BaseSchema
from membrane.domain.config import RunConfig, SweepConfig
from membrane.repositories.config_repository import with_override
from membrane.repositories.diagnostics_repository import DIAGNOSTIC_COLUMNS, DiagnosticsRepository
from membrane.services.base import BaseService
from membrane.services.simulation_service import run_simulation

logger = logging.getLogger(__name__)

ENERGY_COLUMNS = [column for column in DIAGNOSTIC_COLUMNS if column.startswith("e_")]
METRIC_COLUMNS = ["label", "component_count", "area_fraction", "mean_elongation"]


class SweepCell(BaseSchema):
    index: int = Field(ge=0)
    name: str
    values: Dict[str, float]
    config: RunConfig


class SweepCellResult(BaseSchema):
    index: int
    name: str
    values: Dict[str, float]
    status: str
    steps: int = 0
    energy: Dict[str, float] = Field(default_factory=dict)
    metrics: Dict[str, object] = Field(default_factory=dict)
    error: Optional[str] = None

    def row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"cell": self.name, **self.values, "status": self.status, "steps": self.steps}
        row.update(self.energy)
        row.update(self.metrics)
        row["error"] = self.error or ""
        return row


class SweepResult(BaseSchema):
    sweep_dir: str
    cells: List[SweepCellResult]
    summary_path: str

    @property
    def failed_cells(self) -> List[SweepCellResult]:
        return [cell for cell in self.cells if cell.status != "ok"]


def build_cells(sweep: SweepConfig, sweep_dir: Path) -> List[SweepCell]:
    """Grid cells in row-major axis order, each with its own output directory."""
    cells = []
    grids = [axis.values for axis in sweep.axes]
    for index, combo in enumerate(itertools.product(*grids)):
        config = sweep.base
        values = {}
        for axis, value in zip(sweep.axes, combo):
            config = with_override(config, axis.path, value)
            values[axis.path] = value
        name = f"cell_{index:03d}"
        config = with_override(config, "output.dir", str(sweep_dir / name))
        cells.append(SweepCell(index=index, name=name, values=values, config=config))
    return cells


def run_cell(cell: SweepCell) -> SweepCellResult:
    """Run one cell; failures are reported, never raised."""
    try:
        result = run_simulation(cell.config)
    except BaseSimulationException as e:
        logger.error(f"Sweep {cell.name} failed: {e.detail}")
        return SweepCellResult(index=cell.index, name=cell.name, values=cell.values, status="error", error=e.detail)
    metrics = result.metrics.model_dump(include=set(METRIC_COLUMNS))
    return SweepCellResult(
        index=cell.index,
        name=cell.name,
        values=cell.values,
        status="failed" if result.failed else "ok",
        steps=result.steps_completed,
        energy=result.energy.model_dump(),
        metrics=metrics,
        error=result.failure.detail if result.failure else None,
    )


class SweepService(BaseService[SweepConfig, SweepResult]):
    """Runs every cell of a sweep, in parallel worker processes when asked."""

    def __init__(self, output_dir: Optional[str] = None, workers: Optional[int] = None):
        self.output_dir = output_dir
        self.workers = workers
        super().__init__(DiagnosticsRepository(output_dir or "."))

    def _execute(self, sweep: SweepConfig) -> SweepResult:
        sweep_dir = Path(self.output_dir or sweep.base.output.dir)
        self.repository = DiagnosticsRepository(sweep_dir)
        self.repository.ensure_dir()
        cells = build_cells(sweep, sweep_dir)
        workers = self.workers or sweep.workers
        logger.info(f"Sweep of {len(cells)} cells with {workers} worker(s) into {sweep_dir}")

        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(run_cell, cells))
        else:
            results = [run_cell(cell) for cell in cells]
        results.sort(key=lambda r: r.index)

        columns = ["cell", *[axis.path for axis in sweep.axes], "status", "steps", *ENERGY_COLUMNS, *METRIC_COLUMNS, "error"]
        summary = self.repository.write_table(columns, [r.row() for r in results], "summary.csv")
        failed = sum(1 for r in results if r.status != "ok")
        logger.info(f"Sweep finished: {len(results) - failed} ok, {failed} failed; summary {summary}")
        return SweepResult(sweep_dir=str(sweep_dir), cells=results, summary_path=str(summary))


def run_sweep(sweep: SweepConfig, output_dir: Optional[str] = None, workers: Optional[int] = None) -> SweepResult:
    return SweepService(output_dir, workers).run(sweep)
