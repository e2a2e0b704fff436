from typing import Generic, TypeVar

from pydantic import BaseModel

from membrane.repositories.base import BaseArtifactRepository

ConfigType = TypeVar("ConfigType", bound=BaseModel)
ResultType = TypeVar("ResultType")


class BaseService(Generic[ConfigType, ResultType]):
    """Base service: validates a configuration, executes it, stores artifacts through a repository."""

    def __init__(self, repository: BaseArtifactRepository):
        self.repository = repository

    def run(self, config: ConfigType) -> ResultType:
        """Validate, then execute."""
        self._validate_config(config)
        return self._execute(config)

    def _validate_config(self, config: ConfigType) -> None:
        """Check run preconditions. Override in subclasses for custom validation."""
        pass

    def _execute(self, config: ConfigType) -> ResultType:
        raise NotImplementedError
