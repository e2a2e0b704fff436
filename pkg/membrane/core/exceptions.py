from typing import Any, Optional

# Process exit codes surfaced by the command line
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_IO = 3


class BaseSimulationException(Exception):
    """Base exception for all simulator errors."""

    exit_code: int = EXIT_SOLVER

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigException(BaseSimulationException):
    """Raised when a run or sweep configuration cannot be parsed or validated."""

    exit_code = EXIT_CONFIG

    def __init__(self, key: str, detail: str):
        super().__init__(f"Config error on {key}: {detail}")
        self.key = key


class ValidationException(BaseSimulationException):
    """Raised when input data fails validation."""

    exit_code = EXIT_CONFIG

    def __init__(self, detail: str):
        super().__init__(f"Validation error: {detail}")


class InvalidParameterException(ValidationException):
    """Raised when a model parameter violates positivity or definiteness."""


class InvalidMeshException(ValidationException):
    """Raised when a mesh cannot be built."""


class PreconditionException(BaseSimulationException):
    """Raised when an operation is called outside its precondition."""

    exit_code = EXIT_CONFIG


class SingularMatrixException(BaseSimulationException):
    """Raised when a dense factorization meets a pivot below threshold."""


class NumericException(BaseSimulationException):
    """Raised when a scalar iteration fails to converge."""


class SolverFailureException(BaseSimulationException):
    """Raised when a time step cannot be completed."""

    def __init__(self, detail: str, report: Any = None):
        super().__init__(f"Solver failure: {detail}")
        self.report = report


class OracleFailureException(BaseSimulationException):
    """Raised when a reference computation hits its iteration cap."""


class ArtifactIOException(BaseSimulationException):
    """Raised when artifact files cannot be read or written."""

    exit_code = EXIT_IO

    def __init__(self, detail: str = "Artifact operation failed"):
        super().__init__(detail)
