"""Load JSON configuration documents and merge command-line overrides."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Optional

from cxr.config.schema import SynthConfig, TrainConfig, validate_document
from cxr.errors import ConfigFileLoadError

SHIPPED_DIR = Path(__file__).resolve().parent


def shipped_config(name: str) -> Path:
    """Path of a config shipped with the package (`desk`, `full`, `synth`)."""
    path = SHIPPED_DIR / f"{name}.json"
    if not path.is_file():
        raise ConfigFileLoadError(f"No shipped config named '{name}'.")
    return path


def resolve_config_path(value: Path) -> Path:
    """A bare shipped name (`desk`) resolves to the packaged file; anything else is a path."""
    if not value.exists() and value.suffix == "" and len(value.parts) == 1:
        return shipped_config(str(value))
    return value


def load_json_config(config_path: Path) -> dict[str, Any]:
    """Load a JSON config file whose root is an object."""
    if not config_path.exists():
        raise ConfigFileLoadError(f"Config file not found: '{config_path}'.")

    try:
        raw = config_path.read_text(encoding="utf-8")
        payload = json.loads(raw)
    except OSError as exc:
        raise ConfigFileLoadError(f"Failed to read config file '{config_path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigFileLoadError(
            f"Invalid JSON in config file '{config_path}': {exc.msg} "
            f"(line {exc.lineno}, column {exc.colno})."
        ) from exc

    if not isinstance(payload, dict):
        raise ConfigFileLoadError(f"Config root must be a JSON object in '{config_path}'.")

    return payload


def merge_overrides(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Overlay non-None overrides; nested mappings merge key by key."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            nested = merged.get(key)
            merged[key] = merge_overrides(nested if isinstance(nested, Mapping) else {}, value)
        else:
            merged[key] = value
    return merged


def load_train_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    payload = load_json_config(resolve_config_path(config_path)) if config_path else {}
    return validate_document(TrainConfig, merge_overrides(payload, overrides or {}))


def load_synth_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SynthConfig:
    payload = load_json_config(resolve_config_path(config_path)) if config_path else {}
    return validate_document(SynthConfig, merge_overrides(payload, overrides or {}))
