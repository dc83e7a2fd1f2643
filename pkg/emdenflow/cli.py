import functools
import math
import multiprocessing
import sys
from typing import Any, Dict, List, Literal, Optional

import click
import numpy as np
import pydantic
from rich.console import Console
from rich.tree import Tree
from structlog import get_logger
from tabulate import tabulate

from emdenflow import continuous, critical, discrete, shooting
from emdenflow.core.errors import (
    ConfigValidationError,
    DomainError,
    NumericalError,
    VerificationFailed,
)
from emdenflow.core.settings import CriticalSettings
from emdenflow.core.types import ModelParams
from emdenflow.utils.logging import configure_logging
from emdenflow.utils.memory import PerformanceTracker
from emdenflow.utils.pretty import describe as describe_tree
from emdenflow.utils.serialization import render, to_json, write_output
from emdenflow.verify import run_verify

logger = get_logger(__name__)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4

DEFAULT_EVAL_K = (0.01, 0.1, 1.0)
DEFAULT_COMPARE_K = (0.001, 0.01, 0.1)

CRITICAL_COLUMNS = [
    "k",
    "w",
    "t0",
    "F_at_t0",
    "regime",
    "t1",
    "t2",
    "t2_lower_bound",
    "lower_ratio_bound",
    "upper_ratio_bound",
]


class RunConfig(pydantic.BaseModel):
    """Validated arguments of one command."""

    model_config = pydantic.ConfigDict(extra="forbid")

    command: Literal[
        "eval",
        "solve-w",
        "critical",
        "crossings",
        "recursion",
        "compare",
        "verify",
        "sweep",
        "describe",
    ]
    k: List[pydantic.PositiveFloat] = []
    t_min: float = pydantic.Field(1.0, ge=1.0, allow_inf_nan=False)
    t_max: float = pydantic.Field(500.0, ge=1.0, allow_inf_nan=False)
    t_steps: int = pydantic.Field(200, ge=1)
    j_max: int = pydantic.Field(100, ge=1)
    tol: Optional[pydantic.PositiveFloat] = None
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"

    @pydantic.model_validator(mode="after")
    def non_empty_range(self):
        if self.t_min > self.t_max:
            raise ValueError(f"empty t range [{self.t_min}, {self.t_max}]")
        return self


def _config(command: str, **kwargs) -> RunConfig:
    try:
        return RunConfig(command=command, **kwargs)
    except pydantic.ValidationError as exc:
        raise ConfigValidationError(command, pydantic_exc=exc) from exc


def _fail(message: str, code: int):
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    """Map library errors to exit codes, messages to stderr."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ConfigValidationError, DomainError) as exc:
            _fail(str(exc), EXIT_USAGE)
        except NumericalError as exc:
            _fail(str(exc), EXIT_NUMERICAL)
        except VerificationFailed as exc:
            _fail(str(exc), EXIT_VERIFICATION)

    return wrapper


def _emit(config: RunConfig, columns: List[str], rows: List[Dict[str, Any]]) -> None:
    write_output(render(columns, rows, config.format), config.output)


k_option = click.option(
    "--k", "k", type=float, multiple=True, help="ODE coefficient, repeatable."
)
format_option = click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv"
)
output_option = click.option(
    "--output", type=click.Path(dir_okay=False, writable=True), default=None
)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["debug", "info", "warning", "error"]),
    default="warning",
)
@click.option(
    "--seedless",
    is_flag=True,
    help="Reserved; nothing here is random, so the flag is always rejected.",
)
def emdenflow_cli(log_level, seedless):
    """Solutions of f'' = k/f and the discrete line recursion."""
    if seedless:
        raise click.UsageError("--seedless is reserved and not supported")
    configure_logging(log_level)


@emdenflow_cli.command("eval")
@k_option
@click.option("--t-min", type=float, default=1.0)
@click.option("--t-max", type=float, default=500.0)
@click.option("--t-steps", type=int, default=200)
@click.option("--t", "ts", type=float, multiple=True, help="Explicit t values.")
@format_option
@output_option
@handle_errors
def eval_cli(k, t_min, t_max, t_steps, ts, fmt, output):
    """
    Tabulate f, g and f/g.

    Each k uses the slope w(k) with f(0) = 1 and f(1) = 1 + k; t runs over a
    logarithmic grid unless explicit values are given.
    """
    config = _config(
        "eval",
        k=list(k) or list(DEFAULT_EVAL_K),
        t_min=t_min,
        t_max=t_max,
        t_steps=t_steps,
        format=fmt,
        output=output,
    )
    if ts:
        grid = [float(t) for t in ts]
    elif config.t_steps == 1:
        grid = [config.t_min]
    else:
        grid = np.geomspace(config.t_min, config.t_max, config.t_steps).tolist()
    rows = []
    for kv in config.k:
        p = ModelParams(k=kv, y=1.0, w=shooting.solve_w(kv).w)
        for t in grid:
            f = continuous.f_eval(t, p)
            g = continuous.g_eval(t, kv)
            ratio = f / g if g > 0 else None
            rows.append({"k": kv, "w": p.w, "t": t, "f": f, "g": g, "ratio": ratio})
    _emit(config, ["k", "w", "t", "f", "g", "ratio"], rows)


@emdenflow_cli.command("solve-w")
@k_option
@click.option("--tol", type=float, default=None)
@format_option
@output_option
@handle_errors
def solve_w_cli(k, tol, fmt, output):
    """Initial slope w(k) with f(0) = 1 and f(1) = 1 + k."""
    config = _config("solve-w", k=list(k), tol=tol, format=fmt, output=output)
    if not config.k:
        raise click.UsageError("at least one --k is required")
    rows = []
    for kv in config.k:
        res = shooting.solve_w(kv, tol=config.tol)
        rows.append(
            {
                "k": res.k,
                "w": res.w,
                "scaled_slope": res.scaled_slope,
                "residual": res.residual,
                "iterations": res.iterations,
            }
        )
    _emit(config, ["k", "w", "scaled_slope", "residual", "iterations"], rows)


def _critical_row(k: float) -> Dict[str, Any]:
    return critical.critical_report(k).model_dump(mode="json")


@emdenflow_cli.command("critical")
@k_option
@format_option
@output_option
@handle_errors
def critical_cli(k, fmt, output):
    """
    Critical reports for the given k, or the critical constants without --k.
    """
    config = _config("critical", k=list(k), format=fmt, output=output)
    if config.k:
        _emit(config, CRITICAL_COLUMNS, [_critical_row(kv) for kv in config.k])
        return
    kc = critical.solve_kc()
    wc = shooting.solve_w(kc).w
    row = {"k_c": kc, "w": wc, "t0": critical.solve_t0(kc, wc)}
    _emit(config, ["k_c", "w", "t0"], [row])


@emdenflow_cli.command("crossings")
@k_option
@click.option(
    "--normalized", is_flag=True, help="Crossings of f0 and g(·; 1) instead."
)
@format_option
@output_option
@handle_errors
def crossings_cli(k, normalized, fmt, output):
    """Where f meets g, for k below the critical coefficient."""
    config = _config("crossings", k=list(k), format=fmt, output=output)
    if normalized:
        points = [critical.normalized_crossings()]
    elif config.k:
        points = [critical.crossings(kv) for kv in config.k]
    else:
        raise click.UsageError("give --k or --normalized")
    _emit(
        config,
        ["k", "t1", "t0", "t2", "t2_lower_bound"],
        [p.model_dump() for p in points],
    )


@emdenflow_cli.command("recursion")
@k_option
@click.option("--j-max", type=int, default=100)
@click.option(
    "--check", is_flag=True, help="Report the recursion properties as JSON instead."
)
@format_option
@output_option
@handle_errors
def recursion_cli(k, j_max, check, fmt, output):
    """Voltages V_0..V_n of the line recursion."""
    config = _config("recursion", k=list(k), j_max=j_max, format=fmt, output=output)
    if not config.k:
        raise click.UsageError("at least one --k is required")
    if check:
        reports = [
            discrete.check_properties(discrete.recursion_trace(kv, config.j_max))
            for kv in config.k
        ]
        write_output(
            to_json(
                [{**r.model_dump(mode="json"), "passed": r.passed} for r in reports]
            ),
            config.output,
        )
        return
    rows = []
    for kv in config.k:
        trace = discrete.recursion_trace(kv, config.j_max)
        for j, v in enumerate(trace.values):
            diff = trace.first_differences[j] if j < trace.n else None
            rows.append({"k": kv, "j": j, "V": v, "difference": diff})
    _emit(config, ["k", "j", "V", "difference"], rows)


@emdenflow_cli.command("compare")
@k_option
@click.option("--j-max", type=int, default=100)
@format_option
@output_option
@handle_errors
def compare_cli(k, j_max, fmt, output):
    """V_j against W_j = g(j), with the log-identity quotient."""
    config = _config(
        "compare",
        k=list(k) or list(DEFAULT_COMPARE_K),
        j_max=j_max,
        format=fmt,
        output=output,
    )
    rows = []
    for kv in config.k:
        trace = discrete.recursion_trace(kv, config.j_max + 1)
        quotients = discrete.log_identity_quotients(trace)
        for j in range(1, config.j_max + 1):
            v = float(trace.values[j])
            w = discrete.w_sequence(j, kv)
            rows.append(
                {
                    "k": kv,
                    "j": j,
                    "V": v,
                    "W": w,
                    "ratio": v / w if w > 0 else None,
                    "log_quotient": float(quotients[j - 1]) if j >= 2 else None,
                }
            )
    _emit(config, ["k", "j", "V", "W", "ratio", "log_quotient"], rows)


def _summary(report) -> str:
    table = [
        (module, name, "pass" if check.passed else "FAIL", check.actual, check.expected)
        for module, checks in report.modules.items()
        for name, check in checks.items()
    ]
    return (
        tabulate(table, headers=["module", "check", "status", "actual", "expected"])
        + "\n"
    )


@emdenflow_cli.command("verify")
@click.option("--profile", type=click.Choice(["full", "quick"]), default="full")
@click.option(
    "--kc-bracket",
    type=float,
    nargs=2,
    default=None,
    help="Search interval for the k_c check.",
)
@click.option("--module", "modules", multiple=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@output_option
@handle_errors
def verify_cli(profile, kc_bracket, modules, fmt, output):
    """Run the verification checks; exits 4 when any check fails."""
    if kc_bracket:
        try:
            CriticalSettings(kc_low=kc_bracket[0], kc_high=kc_bracket[1])
        except pydantic.ValidationError as exc:
            raise ConfigValidationError("verify", pydantic_exc=exc) from exc
    with PerformanceTracker("verify") as perf:
        report = run_verify(
            profile, kc_bracket=kc_bracket, modules=list(modules) or None
        )
    logger.info("Verification done", duration=perf.describe(), passed=report.passed)
    if fmt == "json":
        doc = {
            "profile": report.profile,
            "passed": report.passed,
            "modules": report.model_dump(mode="json", by_alias=True)["modules"],
        }
        text = to_json(doc)
    else:
        text = _summary(report)
    write_output(text, output)
    if not report.passed:
        raise VerificationFailed(report.failed_checks)


def _sweep_row(k: float) -> Dict[str, Any]:
    return _critical_row(k)


@emdenflow_cli.command("sweep")
@click.option("--k-min", type=float, default=0.1)
@click.option("--k-max", type=float, default=3.0)
@click.option("--k-steps", type=int, default=10)
@click.option("--processes", type=int, default=None)
@format_option
@output_option
@handle_errors
def sweep_cli(k_min, k_max, k_steps, processes, fmt, output):
    """Critical reports over a log grid of k, computed in parallel."""
    if not (0 < k_min <= k_max) or k_steps < 1:
        raise click.BadParameter("need 0 < k-min <= k-max and k-steps >= 1")
    ks = [float(k) for k in np.geomspace(k_min, k_max, k_steps)]
    config = _config("sweep", k=ks, format=fmt, output=output)
    if processes == 1:
        rows = [_sweep_row(k) for k in config.k]
    else:
        with multiprocessing.Pool(processes) as pool:
            # imap keeps the k order whatever the completion order
            rows = list(pool.imap(_sweep_row, config.k))
    _emit(config, CRITICAL_COLUMNS, rows)


@emdenflow_cli.command("describe")
@click.option("--k", "k", type=float, required=True)
@handle_errors
def describe_cli(k):
    """Show the critical report for one k as a tree."""
    _config("describe", k=[k])
    report = critical.critical_report(k)
    console = Console()
    console.print(describe_tree(report, t=Tree(f"[bold]k = {k:g}[/bold]")))
    if report.upper_ratio_bound is None:
        console.print("f stays above g: no upper ratio bound applies")
    else:
        console.print(
            f"f/g lies within [{report.lower_ratio_bound:.4f}, "
            f"{report.upper_ratio_bound}] on [t1, t2]"
        )
    if not math.isfinite(report.F_at_t0):
        logger.warning("Gap at t0 is not finite", k=k)
