"""TOML configuration: ``[plant]``, ``[controller]`` and ``[experiment]`` tables."""

from __future__ import annotations

import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controllers import ControllerConfig
from .errors import ConfigError
from .model import PlantConfig

_TUPLE_FIELDS = {"gamma_lower", "gamma_upper", "candidate_inputs", "controllers"}


def _build(cls, table: Mapping[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    kwargs = {k: tuple(v) if k in _TUPLE_FIELDS else v for k, v in table.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path: Optional[Path]) -> dict:
    """Parse a config file; a missing path yields the defaults."""
    data: dict = {}
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    extra = set(data) - {"plant", "controller", "experiment"}
    if extra:
        raise ConfigError(f"unknown tables: {sorted(extra)}")
    return data


def plant_config(data: Mapping, **overrides) -> PlantConfig:
    table = dict(data.get("plant", {}))
    table.update({k: v for k, v in overrides.items() if v is not None})
    return _build(PlantConfig, table, "plant")


def controller_config(data: Mapping, kind: str = "adaptive", **overrides) -> ControllerConfig:
    table = dict(data.get("controller", {}))
    table["kind"] = kind
    table.update({k: v for k, v in overrides.items() if v is not None})
    return _build(ControllerConfig, table, "controller")
