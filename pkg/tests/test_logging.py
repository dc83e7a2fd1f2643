import contextlib

import numpy as np
import structlog
from structlog.testing import capture_logs

from emdenflow import shooting
from emdenflow.core.types import RecursionTrace
from emdenflow.discrete import check_properties
from emdenflow.utils.logging import ContextualizedLogging, configure_logging


def test_structured_logging():
    with capture_logs() as cap_logs:
        logger = structlog.get_logger("testing")
        logger.info("It works", k=0.5)
    d = cap_logs[0]
    assert d["k"] == 0.5
    assert d["event"] == "It works"


CONTEXT_RES = [
    {"suite": "critical", "event": "suite message", "log_level": "info"},
    {
        "suite": "critical",
        "check": "k_c",
        "event": "check message",
        "log_level": "info",
    },
    {"suite": "discrete", "event": "override message", "log_level": "info"},
    {"suite": "critical", "event": "suite message2", "log_level": "info"},
]


@contextlib.contextmanager
def capture_logs_with_contextvars():
    cap = structlog.testing.LogCapture()
    old_processors = structlog.get_config()["processors"]
    try:
        structlog.configure(processors=[structlog.contextvars.merge_contextvars, cap])
        yield cap.entries
    finally:
        structlog.configure(processors=old_processors)


def test_context():
    with capture_logs_with_contextvars() as cap_logs:
        logger = structlog.get_logger("testing")
        with ContextualizedLogging(suite="critical"):
            logger.info("suite message")
            with ContextualizedLogging(check="k_c"):
                logger.info("check message")
            with ContextualizedLogging(suite="discrete"):
                logger.info("override message")
            logger.info("suite message2")
    assert cap_logs == CONTEXT_RES


def test_solver_events():
    with capture_logs() as cap_logs:
        shooting.solve_w(0.5)
    solved = [d for d in cap_logs if d["event"] == "Solved shooting problem"]
    assert solved and solved[0]["k"] == 0.5
    assert solved[0]["log_level"] == "debug"


def test_property_violation_is_logged():
    # V_1 is below 1 + k, breaking the growth bound
    trace = RecursionTrace(
        k=1.0, values=np.array([1.0, 1.5, 3.0]), first_differences=np.array([0.5, 1.5])
    )
    with capture_logs() as cap_logs:
        report = check_properties(trace)
    assert not report.passed
    warning = [d for d in cap_logs if d["log_level"] == "warning"][0]
    assert "lower_growth" in warning["failed"]


def test_configure_logging_to_stderr(capsys):
    old = structlog.get_config()
    try:
        configure_logging("info")
        structlog.get_logger("testing").info("to stderr", k=1)
        structlog.get_logger("testing").debug("filtered out")
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "to stderr" in captured.err
        assert "filtered out" not in captured.err
    finally:
        structlog.configure(**old)
