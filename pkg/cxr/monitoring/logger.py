"""Structured run logging on loguru."""

from __future__ import annotations

import json
import sys
from typing import Any

from loguru import logger

from cxr.config.schema import RuntimeSettings

HUMAN_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{module}</cyan> | "
    "{message}"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {module} | {message}"


def _render_json(record: dict[str, Any]) -> None:
    payload: dict[str, Any] = {
        "ts": record["time"].isoformat(),
        "level": record["level"].name,
        "logger": record["name"],
        "message": record["message"],
    }
    extra = record["extra"]
    if extra.get("event"):
        payload["event"] = extra["event"]
    context = extra.get("context")
    if isinstance(context, dict):
        payload.update(context)
    extra["json"] = json.dumps(payload, sort_keys=True, default=str)


def initialize_logger(settings: RuntimeSettings) -> None:
    """Replace every loguru sink with stderr (human or JSON) plus an optional file."""
    logger.remove()
    logger.configure(patcher=_render_json if settings.log_json else None)
    if settings.log_json:
        logger.add(sys.stderr, format="{extra[json]}", level=settings.log_level, colorize=False)
    else:
        logger.add(sys.stderr, format=HUMAN_FORMAT, level=settings.log_level, colorize=None)

    if settings.log_file is not None:
        settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            settings.log_file,
            format="{extra[json]}" if settings.log_json else FILE_FORMAT,
            level=settings.log_level,
            rotation="10 MB",
            colorize=False,
        )
    logger.debug("Logging initialized at {} level", settings.log_level)


def log_event(event: str, message: str, **context: Any) -> None:
    """INFO record tagged with an event name; context fields join the JSON payload."""
    logger.bind(event=event, context=context).info(message)
