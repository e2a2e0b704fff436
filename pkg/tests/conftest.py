import pytest
import numpy as np
from pathlib import Path
from typing import Callable

from membrane.core.dependencies import get_mesh
from membrane.domain.params import ModelParams
from membrane.domain.state import SimState
from membrane.repositories.config_repository import parse_config
from membrane.services.operators import assemble_matrices
from membrane.services.scheme import SolverOptions

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# Run-file text shared by the service and CLI tests; format() fills the blanks
RUN_TEMPLATE = """
mesh.n = {n}

time.tau = {tau}
time.t_end = {t_end}

params.eps = 0.01
params.sigma = 1.0
params.kappa = 0.01
params.lambda = {Lambda}

init.mean_u = {mean_u}
init.amplitude = {amplitude}
init.seed = {seed}

output.dir = {out}
output.every_steps = {every}
output.formats = {formats}
"""


@pytest.fixture(scope="session")
def config_dir() -> Path:
    """Directory of the shipped run and sweep files."""
    return CONFIG_DIR


@pytest.fixture(scope="session")
def mesh8():
    """Smallest mesh used for solver checks."""
    return get_mesh(8)


@pytest.fixture(scope="session")
def params() -> ModelParams:
    """Stripe-regime coefficients: sigma = 1, kappa = eps = 0.01, Lambda = 0.6."""
    return ModelParams.isotropic(eps=0.01, kappa=0.01, sigma=1.0, Lambda=0.6, tau=1e-4)


@pytest.fixture(scope="session")
def uncoupled_params() -> ModelParams:
    """Same coefficients with the coupling switched off."""
    return ModelParams.isotropic(eps=0.01, kappa=0.01, sigma=1.0, Lambda=0.0, tau=1e-4)


@pytest.fixture(scope="session")
def matrices8(mesh8, params):
    return assemble_matrices(mesh8, params)


@pytest.fixture(scope="session")
def factorized8(mesh8, params):
    """Scheme matrices whose Poisson solves are direct, for finite-difference checks."""
    return assemble_matrices(mesh8, params, poisson_solver="factorized")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def random_state(mesh8, rng) -> Callable[..., SimState]:
    """Factory for states with u = mean + uniform noise and small random h."""

    def make(mean: float = 0.1, amplitude: float = 0.2, h_amplitude: float = 0.01) -> SimState:
        N = mesh8.vertex_count
        u = mean + amplitude * rng.uniform(-1.0, 1.0, N)
        h = h_amplitude * rng.uniform(-1.0, 1.0, N)
        return SimState.from_fields(u, h)

    return make


@pytest.fixture
def tight_options() -> SolverOptions:
    return SolverOptions(newton_tol=1e-11, minres_tol=1e-12, cg_tol=1e-12)


@pytest.fixture
def run_text(tmp_path) -> Callable[..., str]:
    """Factory for run-file text on a small mesh writing below tmp_path."""

    def make(**overrides) -> str:
        values = {
            "n": 8,
            "tau": 1e-3,
            "t_end": 5e-3,
            "Lambda": 0.6,
            "mean_u": 0.1,
            "amplitude": 0.2,
            "seed": 1,
            "out": tmp_path / "run",
            "every": 1,
            "formats": "csv, pgm",
        }
        values.update(overrides)
        return RUN_TEMPLATE.format(**values)

    return make


@pytest.fixture
def run_config(run_text):
    """Factory for parsed RunConfig objects."""

    def make(**overrides):
        return parse_config(run_text(**overrides))

    return make


@pytest.fixture
def run_file(tmp_path, run_text) -> Callable[..., Path]:
    """Factory writing run-file text to disk."""

    def make(name: str = "run.cfg", **overrides) -> Path:
        path = tmp_path / name
        path.write_text(run_text(**overrides), encoding="utf-8")
        return path

    return make
