"""Voltages V_j of the line recursion V_{j+1} - 2V_j + V_{j-1} = k/V_j and their
comparison with W_j = g(j).

The recursion is iterated in difference form, d_{j+1} = d_j + k/V_j and
V_{j+1} = V_j + d_{j+1}, from V_0 = 1 and d_1 = k.
"""
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from structlog import get_logger

from emdenflow.continuous import g_eval
from emdenflow.core.errors import BracketError, OverflowGuardError, require
from emdenflow.core.settings import get_settings
from emdenflow.core.types import (
    ConvergenceDiagnostic,
    DiscreteCrossing,
    PropertyCheck,
    PropertyReport,
    RecursionTrace,
)
from emdenflow.critical import solve_psi_log
from emdenflow.quadrature import guard_exponent

logger = get_logger(__name__)

TELESCOPING_RTOL = 1e-10
INEQUALITY_RTOL = 1e-12
MAX_EXPONENT = 8


def _check_k(k: float) -> None:
    require(math.isfinite(k) and k > 0, f"k must be positive, got {k!r}")


def _check_length(n: int) -> None:
    require(n >= 1, f"n must be at least 1, got {n!r}")
    max_terms = get_settings().discrete.max_terms
    require(n <= max_terms, f"n={n} exceeds the size guard of {max_terms} terms")


def iterate_recursion(k: float, n: int) -> Iterator[Tuple[int, float, float]]:
    """Yield (j, V_j, V_{j+1} - V_j) for j = 0..n, holding constant memory."""
    _check_k(k)
    _check_length(n)
    v, d = 1.0, k
    for j in range(n + 1):
        yield j, v, d
        v += d
        d += k / v


def recursion_trace(k: float, n: int) -> RecursionTrace:
    """V_0..V_n together with the n first differences."""
    _check_k(k)
    _check_length(n)
    if n > get_settings().discrete.stream_threshold:
        logger.warning(
            "Materializing a long trace, diagnostics can stream instead", k=k, n=n
        )
    values = np.empty(n + 1)
    diffs = np.empty(n)
    for j, v, d in iterate_recursion(k, n):
        values[j] = v
        if j < n:
            diffs[j] = d
    return RecursionTrace(k=k, values=values, first_differences=diffs)


def w_sequence(j: int, k: float) -> float:
    """W_j = j·(2k·ln j)^{1/2} = g(j)"""
    require(int(j) == j and j >= 1, f"j must be a positive integer, got {j!r}")
    return g_eval(float(j), k)


def _check(margin: np.ndarray, scale: np.ndarray, rtol: float) -> PropertyCheck:
    bad = np.flatnonzero(margin < -rtol * np.abs(scale))
    worst = margin / np.maximum(np.abs(scale), np.finfo(float).tiny)
    return PropertyCheck(
        passed=bad.size == 0,
        first_violation=int(bad[0]) if bad.size else None,
        worst_margin=float(worst.min()) if worst.size else None,
    )


def check_properties(trace: RecursionTrace) -> PropertyReport:
    """
    Check over the whole trace that

    - V_j ≥ 1 + j·k
    - V_{j+1} - V_j = k·Σ_{i≤j} 1/V_i
    - V_{j+1} - V_j ≤ k + ln(1 + j·k)
    - (V_{j+1} - V_j)/V_j ≤ (k + ln(1 + j·k))/(1 + j·k)

    Margins are reported relative to the bound; equality holds at j = 0.
    """
    k, v, d = trace.k, trace.values, trace.first_differences
    j_all = np.arange(trace.n + 1, dtype=float)
    j = j_all[:-1]
    linear = 1.0 + j_all * k
    partial = k * np.cumsum(1.0 / v[:-1])
    diff_bound = k + np.log1p(j * k)
    ratio_bound = diff_bound / (1.0 + j * k)
    checks = {
        "lower_growth": _check(v - linear, linear, INEQUALITY_RTOL),
        "telescoping": _check(-np.abs(d - partial), partial, TELESCOPING_RTOL),
        "difference_bound": _check(diff_bound - d, diff_bound, INEQUALITY_RTOL),
        "relative_difference_bound": _check(
            ratio_bound - d / v[:-1], ratio_bound, INEQUALITY_RTOL
        ),
    }
    report = PropertyReport(k=k, n=trace.n, checks=checks)
    if not report.passed:
        logger.warning(
            "Recursion property violated",
            k=k,
            failed=[name for name, c in checks.items() if not c.passed],
        )
    return report


def log_identity_quotients(trace: RecursionTrace) -> np.ndarray:
    """
    [ln V_{j+1} - ln V_{j-1}] / [(V_{j+1} - V_{j-1})/V_j] for j = 1..n-1,
    at position j - 1.
    """
    v, d = trace.values, trace.first_differences
    span = d[1:] + d[:-1]
    return np.log1p(span / v[:-2]) / (span / v[1:-1])


def log_identity_quotient(trace: RecursionTrace, j: int) -> float:
    require(
        2 <= j <= trace.n - 1,
        f"j must lie in [2, {trace.n - 1}] for a trace of length {trace.n}, got {j}",
    )
    v, d = trace.values, trace.first_differences
    span = d[j] + d[j - 1]
    return float(math.log1p(span / v[j - 1]) / (span / v[j]))


def difference_constant(k: float) -> float:
    """k² - k·ln(1 + k)"""
    _check_k(k)
    return k * k - k * math.log1p(k)


def _first_n_with_psi_below(k: float, level: float) -> Optional[int]:
    try:
        log_n = solve_psi_log(k, level)
        guard_exponent(log_n)
    except (BracketError, OverflowGuardError):
        # the level lies beyond any representable ln n
        return None
    return max(2, math.ceil(math.exp(log_n)))


def estimate_c_hat(trace: RecursionTrace) -> Tuple[float, Optional[int]]:
    """
    Ĉ = min over j ≥ 1 of (V_{j+1} - V_j)² - 2k·ln V_j, and the first n ≥ 2 with
    ψ(n) ≤ Ĉ - 1 (None when it is not representable).
    """
    require(trace.n >= 2, "estimating Ĉ needs at least two steps")
    k, v, d = trace.k, trace.values, trace.first_differences
    c_hat = float(np.min(d[1:] ** 2 - 2.0 * k * np.log(v[1:-1])))
    return c_hat, _first_n_with_psi_below(k, c_hat - 1.0)


def crossing_detect(k: float, n_max: int) -> DiscreteCrossing:
    """
    Scan j = 2..n_max for V_j ≥ W_j, streaming the recursion.

    Besides the first index, reports the maximal runs where V_j < W_j, the start
    of the final run where V_j ≥ W_j and whether no run starts past the estimated
    n0 = min{n : ψ(n) ≤ Ĉ - 1}.
    """
    require(n_max >= 2, f"n_max must be at least 2, got {n_max}")
    two_k = 2.0 * k
    first_index: Optional[int] = None
    below_runs: List[Tuple[int, int]] = []
    run_start: Optional[int] = None
    c_hat = math.inf
    for j, v, d in iterate_recursion(k, n_max):
        if 1 <= j < n_max:
            c_hat = min(c_hat, d * d - two_k * math.log(v))
        if j < 2:
            continue
        above = v >= j * math.sqrt(two_k * math.log(j))
        if above:
            if first_index is None:
                first_index = j
            if run_start is not None:
                below_runs.append((run_start, j - 1))
                run_start = None
        elif run_start is None:
            run_start = j
    if run_start is not None:
        below_runs.append((run_start, n_max))

    if first_index is None or run_start is not None:
        persistent_from = None
    elif below_runs:
        persistent_from = below_runs[-1][1] + 1
    else:
        persistent_from = first_index
    persistent = first_index is not None and not any(
        start > first_index for start, _ in below_runs
    )
    n0 = _first_n_with_psi_below(k, c_hat - 1.0)
    consistent = None
    if n0 is not None and n0 <= n_max:
        consistent = not any(end >= n0 for _, end in below_runs)
    logger.debug(
        "Scanned discrete crossings",
        k=k,
        n_max=n_max,
        first_index=first_index,
        below_runs=len(below_runs),
        c_hat=c_hat,
        n0=n0,
    )
    return DiscreteCrossing(
        k=k,
        n_max=n_max,
        first_index=first_index,
        persistent=persistent,
        persistent_from=persistent_from,
        below_runs=below_runs,
        c_hat=c_hat,
        n0_estimate=n0,
        consistent_after_n0=consistent,
    )


def convergence_diagnostic(
    k: float, exponents: Sequence[int]
) -> ConvergenceDiagnostic:
    """
    V_j/W_j at j = 10^e, streamed so that only the samples are retained.

    The deviations are rescaled by √(2k·ln j); the envelope constant C is twice
    the first rescaled deviation and within_envelope tells whether
    |V_j/W_j - 1| ≤ C/√(2k·ln j) at every sample.
    """
    _check_k(k)
    exponents = [int(e) for e in exponents]
    require(len(exponents) >= 1, "at least one exponent is needed")
    require(
        all(a < b for a, b in zip(exponents, exponents[1:])),
        f"exponents must be strictly increasing, got {exponents}",
    )
    require(
        1 <= exponents[0] and exponents[-1] <= MAX_EXPONENT,
        f"exponents must lie in [1, {MAX_EXPONENT}], got {exponents}",
    )
    indices = [10**e for e in exponents]
    wanted = set(indices)
    samples = {}
    for j, v, _ in iterate_recursion(k, indices[-1]):
        if j in wanted:
            samples[j] = v

    ratios = [samples[j] / w_sequence(j, k) for j in indices]
    scaled = [
        (r - 1.0) * math.sqrt(2.0 * k * math.log(j)) for r, j in zip(ratios, indices)
    ]
    deviations = [abs(r - 1.0) for r in ratios]
    envelope = 2.0 * abs(scaled[0])
    monotone = all(b <= a for a, b in zip(deviations, deviations[1:]))
    within = all(abs(s) <= envelope for s in scaled)
    smallest = min(abs(s) for s in scaled)
    band = max(abs(s) for s in scaled) / smallest if smallest > 0 else math.inf
    logger.debug(
        "Convergence diagnostic",
        k=k,
        ratios=ratios,
        band_factor=band,
        monotone=monotone,
    )
    return ConvergenceDiagnostic(
        k=k,
        sample_indices=indices,
        ratios=ratios,
        scaled_deviations=scaled,
        envelope_constant=envelope,
        monotone=monotone,
        within_envelope=within,
        band_factor=band,
        trend_ok=monotone and within,
    )
