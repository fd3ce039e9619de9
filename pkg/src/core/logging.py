"""
Structured logging configuration.
JSON logging for production, colored console for development.
"""

import logging
import sys
import uuid
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any

import structlog
from structlog.types import EventDict, Processor

from src.core.config import get_settings

settings = get_settings()

# Context variables for run tracking
run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)
command_ctx: ContextVar[str | None] = ContextVar("command", default=None)


def add_run_context(
    logger: logging.Logger, method_name: str, event_dict: EventDict
) -> EventDict:
    """Add CLI run context to log events."""
    run_id = run_id_ctx.get()
    command = command_ctx.get()

    if run_id:
        event_dict["run_id"] = run_id
    if command:
        event_dict["command"] = command

    return event_dict


def add_app_context(
    logger: logging.Logger, method_name: str, event_dict: EventDict
) -> EventDict:
    """Add application context to log events."""
    event_dict["app"] = settings.app_name
    event_dict["version"] = settings.app_version
    event_dict["environment"] = settings.environment
    return event_dict


def add_timestamp(
    logger: logging.Logger, method_name: str, event_dict: EventDict
) -> EventDict:
    """Add ISO timestamp to log events."""
    event_dict["timestamp"] = datetime.now(timezone.utc).isoformat()
    return event_dict


def setup_logging() -> None:
    """Configure structured logging based on environment."""
    shared_processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.PositionalArgumentsFormatter(),
        add_timestamp,
        add_app_context,
        add_run_context,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
    ]

    if settings.is_production:
        shared_processors.extend([
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ])
    else:
        shared_processors.extend([
            structlog.dev.ConsoleRenderer(colors=sys.stdout.isatty()),
        ])

    structlog.configure(
        processors=shared_processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    log_level = logging.DEBUG if settings.debug else getattr(
        logging, settings.log_level, logging.INFO
    )

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stdout,
        level=log_level,
    )


def get_logger(name: str | None = None) -> structlog.stdlib.BoundLogger:
    """Get a structured logger instance."""
    return structlog.get_logger(name)


def start_run(command: str) -> str:
    """Tag subsequent log events with a fresh run id and the subcommand."""
    run_id = str(uuid.uuid4())[:8]
    run_id_ctx.set(run_id)
    command_ctx.set(command)
    return run_id


def end_run() -> None:
    """Clear run context."""
    run_id_ctx.set(None)
    command_ctx.set(None)


# Log utility functions
def log_solver_call(
    kind: str,
    dim: int,
    k: int,
    duration_ms: float,
    method: str,
    **extra: Any,
) -> None:
    """Log one eigensolver invocation."""
    logger = get_logger("solver")
    logger.debug(
        "eigensolve",
        kind=kind,
        dim=dim,
        k=k,
        method=method,
        duration_ms=round(duration_ms, 2),
        **extra,
    )


def log_hypothesis_event(name: str, passed: bool, details: dict[str, Any]) -> None:
    """Log the outcome of a theorem-hypothesis gate."""
    logger = get_logger("hypothesis")
    if passed:
        logger.info("hypothesis_checked", hypothesis=name, passed=True, **details)
    else:
        logger.warning("hypothesis_checked", hypothesis=name, passed=False, **details)


def log_scenario_result(name: str, passed: bool, details: dict[str, Any]) -> None:
    """Log an acceptance-scenario verdict."""
    logger = get_logger("verification")
    if passed:
        logger.info("scenario_result", scenario=name, passed=True, **details)
    else:
        logger.error("scenario_result", scenario=name, passed=False, **details)
