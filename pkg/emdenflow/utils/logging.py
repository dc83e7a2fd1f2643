import logging
import sys

import structlog
from structlog import contextvars


class ContextualizedLogging:
    def __init__(self, **kwargs):
        self._context = kwargs

    def __enter__(self):
        self._existing_vars = contextvars.merge_contextvars(
            logger=None, method_name=None, event_dict={}
        )
        contextvars.bind_contextvars(**self._context)
        return self

    def __exit__(self, exc_type, exc_value, exc_traceback):  # noqa: F841
        [contextvars.unbind_contextvars(key) for key in self._context]
        contextvars.bind_contextvars(**self._existing_vars)


def configure_logging(level: str = "warning") -> None:
    """Send structlog events to stderr, keeping stdout for data."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=structlog.PrintLoggerFactory(sys.stderr),
        cache_logger_on_first_use=False,
    )
