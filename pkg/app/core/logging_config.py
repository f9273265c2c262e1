"""
Structured logging for the harness.

Every event carries the run context bound with ``log_context`` (run id, model,
function, attempt), so interleaved lines of concurrent evaluations stay
attributable. Logs go to stderr; stdout is reserved for command output.
"""
import logging
import sys
from contextlib import contextmanager
from typing import Any, Iterator, List

import structlog

from app.config import settings

# client libraries log every request at INFO
QUIET_LOGGERS = ("httpx", "httpcore", "openai")


def configure_logging() -> None:
    """
    Configure structlog and the stdlib root logger.

    JSON lines in production, a console renderer otherwise (colours only on a tty).
    """
    processors: List[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if settings.ENVIRONMENT == "production":
        processors.append(structlog.processors.JSONRenderer(sort_keys=True))
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()))

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    level = getattr(logging, settings.LOG_LEVEL)
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))


@contextmanager
def log_context(**values: Any) -> Iterator[None]:
    """
    Bind values to every log event emitted inside the block.

    Bindings live in context variables, so each asyncio task sees the values
    bound when it was created plus its own.

    Example:
        with log_context(run_id="demo", model="llama3:8b"):
            logger.info("cell_started")
    """
    with structlog.contextvars.bound_contextvars(**values):
        yield
