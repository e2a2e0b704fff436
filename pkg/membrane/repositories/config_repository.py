"""Line-oriented run files: ``section.key = value``, ``#`` comments, no quoting."""
import logging
from typing import Any, Dict, List, Tuple

from pydantic import BaseModel, ValidationError

from membrane.core.config import settings
from membrane.core.exceptions import ConfigException
from membrane.domain.config import RunConfig, SweepConfig
from membrane.repositories.base import BaseArtifactRepository, PathLike

logger = logging.getLogger(__name__)

SECTION_ORDER = ("mesh", "time", "params", "potential", "init", "solver", "output")
SWEEP_PREFIX = "sweep."
MAX_AXES = 2


def _tokenize(text: str) -> List[Tuple[str, str]]:
    """(dotted key, raw value) pairs in file order."""
    pairs = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigException(f"line {lineno}", f"expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(not part for part in key.split(".")):
            raise ConfigException(f"line {lineno}", f"malformed key '{key}'")
        if key in seen:
            raise ConfigException(key, "duplicate key")
        seen.add(key)
        pairs.append((key, value))
    return pairs


def _nest(pairs: List[Tuple[str, str]]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for key, value in pairs:
        parts = key.split(".")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigException(key, f"'{part}' is a value, not a section")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigException(key, "is a section, not a value")
        node[parts[-1]] = value
    return tree


def _error_key(loc: Tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _raise_first(error: ValidationError, key_of=_error_key):
    first = error.errors()[0]
    raise ConfigException(key_of(first["loc"]), first["msg"])


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig from run-file text."""
    tree = _nest(_tokenize(text))
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as e:
        _raise_first(e)


def _format_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _section_lines(prefix: str, section: BaseModel) -> List[str]:
    data = section.model_dump(by_alias=True, exclude_none=True)
    return [f"{prefix}.{key} = {_format_value(value)}" for key, value in data.items()]


def serialize_config(config: RunConfig) -> str:
    """Run-file text that parses back to an equal RunConfig."""
    lines = []
    for name in SECTION_ORDER:
        section_lines = _section_lines(name, getattr(config, name))
        if section_lines:
            lines.extend(section_lines)
            lines.append("")
    return "\n".join(lines)


def with_override(base: RunConfig, path: str, value: Any) -> RunConfig:
    """A copy of ``base`` with one dotted key replaced, revalidated."""
    parts = path.split(".")
    if len(parts) != 2 or parts[0] not in SECTION_ORDER:
        raise ConfigException(path, "sweep path must be 'section.key' of a run configuration")
    data = base.model_dump(by_alias=True)
    section, key = parts
    if key not in data[section]:
        raise ConfigException(path, "unknown key")
    data[section][key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        _raise_first(e)


def _sweep_error_key(loc: Tuple) -> str:
    if not loc:
        return "sweep"
    if loc[0] == "base":
        return _error_key(loc[1:])
    if loc[0] == "axes" and len(loc) > 1 and isinstance(loc[1], int):
        return _error_key((f"sweep.axis{loc[1] + 1}",) + tuple(loc[2:]))
    return "sweep." + _error_key(loc)


def parse_sweep_config(text: str) -> SweepConfig:
    """SweepConfig from a run file with additional ``sweep.*`` keys."""
    pairs = _tokenize(text)
    base_pairs = [(k, v) for k, v in pairs if not k.startswith(SWEEP_PREFIX)]
    sweep_tree = _nest([(k[len(SWEEP_PREFIX):], v) for k, v in pairs if k.startswith(SWEEP_PREFIX)])

    axes = []
    for index in range(1, MAX_AXES + 1):
        axis = sweep_tree.pop(f"axis{index}", None)
        if axis is not None:
            axes.append(axis)
    stray = [key for key in sweep_tree if key.startswith("axis")]
    if stray:
        raise ConfigException(f"sweep.{stray[0]}", f"at most {MAX_AXES} axes, named axis1 and axis2")

    base = parse_config("\n".join(f"{k} = {v}" for k, v in base_pairs))
    data = {
        "base": base,
        "axes": axes,
        "workers": sweep_tree.pop("workers", settings.default_workers),
        "max_cells": sweep_tree.pop("max_cells", settings.sweep_max_cells),
        **sweep_tree,
    }
    try:
        sweep = SweepConfig.model_validate(data)
    except ValidationError as e:
        _raise_first(e, _sweep_error_key)
    for index, axis in enumerate(sweep.axes, start=1):
        try:
            with_override(base, axis.path, axis.values[0])
        except ConfigException as e:
            raise ConfigException(f"sweep.axis{index}.path", e.detail)
    return sweep


class ConfigRepository(BaseArtifactRepository):
    """Reads and writes run and sweep files."""

    def load(self, path: PathLike) -> RunConfig:
        config = parse_config(self.read_text(path))
        logger.info(f"Loaded run configuration {self.path(path)}")
        return config

    def load_sweep(self, path: PathLike) -> SweepConfig:
        sweep = parse_sweep_config(self.read_text(path))
        logger.info(f"Loaded sweep configuration {self.path(path)} ({sweep.cell_count} cells)")
        return sweep

    def save(self, config: RunConfig, path: PathLike):
        return self.write_text(path, serialize_config(config))
