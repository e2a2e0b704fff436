"""CSV tables: per-run diagnostics and sweep summaries."""
import csv
import io
import logging
from typing import Any, Dict, Iterable, List, Sequence

from membrane.domain.state import EnergyBreakdown, StepStats
from membrane.repositories.base import BaseArtifactRepository, PathLike

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = (
    "step",
    "time",
    "mass_u",
    "mass_h",
    "e_potential",
    "e_grad_u",
    "e_surface",
    "e_bend",
    "e_coupling",
    "e_total",
    "newton_iters",
    "krylov_iters",
)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """CSV text with a header row; floats are written with repr so they read back exactly."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column, "")) for column in columns])
    return buffer.getvalue()


def diagnostics_row(
    step: int,
    time: float,
    mass_u: float,
    mass_h: float,
    energy: EnergyBreakdown,
    stats: StepStats,
) -> Dict[str, Any]:
    row = {"step": step, "time": time, "mass_u": mass_u, "mass_h": mass_h}
    row.update(energy.model_dump())
    row["newton_iters"] = stats.newton_iterations
    row["krylov_iters"] = stats.krylov_iterations
    return row


class DiagnosticsRepository(BaseArtifactRepository):
    """Writes diagnostics and summary tables below a run directory."""

    def write_diagnostics(self, rows: List[Dict[str, Any]], path: PathLike = "diagnostics.csv"):
        target = self.write_text(path, render_csv(DIAGNOSTIC_COLUMNS, rows))
        logger.debug(f"Wrote {len(rows)} diagnostic rows to {target}")
        return target

    def write_table(self, columns: Sequence[str], rows: List[Dict[str, Any]], path: PathLike):
        return self.write_text(path, render_csv(columns, rows))

    def read_table(self, path: PathLike) -> List[Dict[str, str]]:
        return list(csv.DictReader(io.StringIO(self.read_text(path))))
