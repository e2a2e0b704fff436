from pathlib import Path

import pytest

from membrane.core.exceptions import SolverFailureException
from membrane.repositories.config_repository import parse_sweep_config
from membrane.repositories.diagnostics_repository import DiagnosticsRepository
from membrane.services.sweep_service import SweepService, build_cells, run_sweep

SWEEP_KEYS = (
    "sweep.axis1.path = params.kappa\n"
    "sweep.axis1.values = 0.01, 0.02\n"
    "sweep.axis2.path = params.lambda\n"
    "sweep.axis2.values = 0.0, 0.6\n"
)


@pytest.fixture
def sweep_config(run_text, tmp_path):
    def make(keys: str = SWEEP_KEYS, **overrides):
        overrides.setdefault("out", tmp_path / "sweep")
        overrides.setdefault("t_end", 2e-3)
        overrides.setdefault("formats", "csv")
        return parse_sweep_config(run_text(**overrides) + keys)

    return make


@pytest.mark.unit
@pytest.mark.service
class TestBuildCells:
    def test_row_major_grid(self, sweep_config, tmp_path):
        cells = build_cells(sweep_config(), tmp_path / "sweep")

        assert [cell.name for cell in cells] == ["cell_000", "cell_001", "cell_002", "cell_003"]
        assert cells[1].values == {"params.kappa": 0.01, "params.lambda": 0.6}
        assert cells[2].values == {"params.kappa": 0.02, "params.lambda": 0.0}

    def test_cell_configs_are_overridden(self, sweep_config, tmp_path):
        cells = build_cells(sweep_config(), tmp_path / "sweep")

        assert cells[3].config.params.kappa == 0.02
        assert cells[3].config.params.lambda_ == 0.6
        assert Path(cells[3].config.output.dir) == tmp_path / "sweep" / "cell_003"


@pytest.mark.integration
@pytest.mark.service
class TestSweepService:
    def test_summary_and_cell_directories(self, sweep_config, tmp_path):
        result = run_sweep(sweep_config())
        sweep_dir = tmp_path / "sweep"

        assert not result.failed_cells
        rows = DiagnosticsRepository(sweep_dir).read_table("summary.csv")
        assert [row["cell"] for row in rows] == ["cell_000", "cell_001", "cell_002", "cell_003"]
        assert all(row["status"] == "ok" for row in rows)
        assert rows[1]["params.lambda"] == "0.6"
        for row in rows:
            assert (sweep_dir / row["cell"] / "diagnostics.csv").exists()
            assert int(row["steps"]) == 2

    def test_parallel_summary_is_byte_identical(self, sweep_config, tmp_path):
        """Worker count does not change a single byte of the summary."""
        sweep = sweep_config()
        serial = SweepService(str(tmp_path / "serial"), workers=1).run(sweep)
        parallel = SweepService(str(tmp_path / "parallel"), workers=4).run(sweep)

        assert Path(serial.summary_path).read_bytes() == Path(parallel.summary_path).read_bytes()

    def test_failed_cell_does_not_stop_sweep(self, sweep_config, mocker):
        from membrane.services import sweep_service

        real = sweep_service.run_simulation

        def flaky(config):
            if config.params.kappa == 0.02 and config.params.lambda_ == 0.6:
                raise SolverFailureException("MINRES stopped")
            return real(config)

        mocker.patch("membrane.services.sweep_service.run_simulation", side_effect=flaky)
        result = run_sweep(sweep_config(), workers=1)

        assert [cell.status for cell in result.cells] == ["ok", "ok", "ok", "error"]
        assert "MINRES stopped" in result.failed_cells[0].error

    def test_single_axis(self, sweep_config, tmp_path):
        keys = "sweep.axis1.path = params.lambda\nsweep.axis1.values = 0.2, 0.6, 2.0\n"
        result = run_sweep(sweep_config(keys=keys))

        assert len(result.cells) == 3
        rows = DiagnosticsRepository(tmp_path / "sweep").read_table("summary.csv")
        assert list(rows[0].keys())[:3] == ["cell", "params.lambda", "status"]
