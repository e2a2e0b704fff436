from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Literal


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="MEMBRANE_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "Membrane Pattern Simulator"
    app_version: str = "1.0.0"
    log_level: str = "INFO"

    # Nonlinear solver
    newton_tol: float = 1e-9
    max_newton: int = 50
    armijo_c: float = 1e-4
    min_step: float = 1e-6

    # Krylov solvers
    minres_tol: float = 1e-10
    cg_tol: float = 1e-10
    max_krylov: int = 5000
    residual_refresh: int = 50
    inner_tol_factor: float = 0.01
    poisson_solver: Literal["cg", "factorized"] = "cg"

    # Sweeps
    sweep_max_cells: int = 64
    default_workers: int = 1

    # Oracle guards
    oracle_max_n: int = 16


# Global settings instance
settings = Settings()
