"""Numerical checks of every module against reference constants and properties.

Checks are grouped per module; a check that raises is recorded as failed with
the error message, so one broken computation never hides the others.
"""
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pydantic
from structlog import get_logger

from emdenflow import continuous, critical, discrete, quadrature, shooting
from emdenflow.core.errors import EmdenflowError
from emdenflow.core.types import (
    CheckResult,
    ConvergenceDiagnostic,
    ModelParams,
    VerifyReport,
)
from emdenflow.utils.logging import ContextualizedLogging
from emdenflow.utils.memory import PerformanceTracker

logger = get_logger(__name__)

# reference constants of the Emden-Fowler analysis
K_C = 1.0384
W_KC = 0.6218
T0_KC = 18.3798
X1 = 2.4556
X2 = 263.0304
MIN_RATIO = 0.8829
X_MIN = 5.7889
MAX_RATIO = 1.0223
ALPHA2 = 1.1115
BOUND_PRODUCT = 1.2023
SHIFT_FACTOR = 1.0326
LOG_FACTOR = 1.0400
SMALL_K = 0.0509
LARGE_K = 3.181
BAND_FACTOR = 3.0
LOG_IDENTITY_TOL = 0.005


class VerifyProfile(pydantic.BaseModel):
    name: str
    y_grid_points: int
    x_grid_max: float
    ode_k_values: Tuple[float, ...]
    ode_t_end: float
    ode_steps: int
    ode_samples: int
    trace_k_values: Tuple[float, ...]
    trace_length: int
    convergence_k_values: Tuple[float, ...]
    convergence_exponents: Tuple[int, ...]
    crossing_n_max: int
    sign_grid: int
    shooting_grid: int
    above_critical_samples: int


PROFILES: Dict[str, VerifyProfile] = {
    "full": VerifyProfile(
        name="full",
        y_grid_points=60,
        x_grid_max=1e3,
        ode_k_values=(0.01, 0.1, 1.0, K_C, 3.0),
        ode_t_end=100.0,
        ode_steps=20_000,
        ode_samples=40,
        trace_k_values=(0.001, 0.01, 0.1, 1.0),
        trace_length=100_000,
        convergence_k_values=(0.1, 1.0),
        convergence_exponents=(3, 4, 5, 6, 7),
        crossing_n_max=10_000,
        sign_grid=20,
        shooting_grid=16,
        above_critical_samples=200,
    ),
    "quick": VerifyProfile(
        name="quick",
        y_grid_points=20,
        x_grid_max=1e3,
        ode_k_values=(0.1, 1.0),
        ode_t_end=10.0,
        ode_steps=2_000,
        ode_samples=10,
        trace_k_values=(0.01, 1.0),
        trace_length=10_000,
        convergence_k_values=(1.0,),
        convergence_exponents=(3, 4, 5),
        crossing_n_max=2_000,
        sign_grid=6,
        shooting_grid=6,
        above_critical_samples=50,
    ),
}

Check = Callable[[], CheckResult]


def close(expected: float, actual: float, tolerance: float) -> CheckResult:
    return CheckResult(
        expected=expected,
        actual=actual,
        tolerance=tolerance,
        passed=abs(actual - expected) <= tolerance,
    )


def rel_close(expected: float, actual: float, tolerance: float) -> CheckResult:
    """Relative agreement; the tolerance is reported as is."""
    return CheckResult(
        expected=expected,
        actual=actual,
        tolerance=tolerance,
        passed=abs(actual - expected) <= tolerance * abs(expected),
    )


def at_most(bound: float, actual: float) -> CheckResult:
    return CheckResult(expected=bound, actual=actual, passed=actual <= bound)


def holds(passed: bool, detail: Optional[str] = None) -> CheckResult:
    return CheckResult(expected=True, actual=bool(passed), passed=passed, detail=detail)


def _max_rel(pairs) -> float:
    return max(abs(a - b) / max(abs(b), 1e-300) for a, b in pairs)


def _quadrature_checks(profile: VerifyProfile) -> Dict[str, Check]:
    ys = np.geomspace(1e-3, 25.0, profile.y_grid_points)

    def integral_inequalities():
        failures = []
        for y in ys:
            y = float(y)
            y2 = y * y
            log_i = quadrature.log_exp_sq_integral(y)
            # ln((e^{y²} - 1)/(2y))
            log_lower = y2 + math.log(-math.expm1(-y2)) - math.log(2.0 * y)
            log_upper = log_lower + math.log(2.0)
            log_sharp = log_lower + math.log1p(2.0 / y2)
            slack = 1e-12 * max(1.0, abs(log_i))
            if not (log_lower - slack <= log_i <= min(log_upper, log_sharp) + slack):
                failures.append(y)
        detail = f"violated at y={failures[:3]}" if failures else None
        return holds(not failures, detail)

    def single_and_interval_forms():
        pairs = [
            (
                quadrature.exp_sq_integral_between(0.0, float(y)),
                quadrature.exp_sq_integral(float(y)),
            )
            for y in ys
            if y <= 10
        ]
        return at_most(1e-11, _max_rel(pairs))

    def additivity():
        points = np.linspace(0.0, 10.0, 9)
        pairs = []
        for a, b, c in zip(points, points[3:], points[6:]):
            a, b, c = float(a), float(b), float(c)
            lhs = quadrature.exp_sq_integral_between(a, b)
            lhs += quadrature.exp_sq_integral_between(b, c)
            pairs.append((lhs, quadrature.exp_sq_integral_between(a, c)))
        return at_most(1e-10, _max_rel(pairs))

    def engine_against_dawson():
        res = quadrature.adaptive_quad(lambda u: math.exp(u * u), 0.0, 1.0)
        return rel_close(quadrature.exp_sq_integral(1.0), res.value, 1e-11)

    return {
        "integral_inequalities": integral_inequalities,
        "single_and_interval_forms": single_and_interval_forms,
        "additivity": additivity,
        "engine_against_dawson": engine_against_dawson,
    }


def _continuous_checks(profile: VerifyProfile) -> Dict[str, Check]:
    def implicit_residual():
        worst = 0.0
        xs = np.concatenate([[0.0], np.geomspace(1e-3, profile.x_grid_max, 50)])
        for x in xs:
            x = float(x)
            u = continuous.solve_U(x)
            err = abs(quadrature.exp_sq_integral(u) - x / math.sqrt(2.0))
            worst = max(worst, err / max(1.0, x))
        return at_most(1e-10, worst)

    def oracle_equivalence():
        kc = critical.solve_kc()
        worst = 0.0
        for k in profile.ode_k_values:
            k = kc if k == K_C else k
            p = ModelParams(k=k, y=1.0, w=shooting.solve_w(k).w)
            path = continuous.ode_oracle(p, profile.ode_t_end, profile.ode_steps)
            stride = max(1, profile.ode_steps // profile.ode_samples)
            for t, f_num, _ in path[stride::stride]:
                worst = max(worst, abs(continuous.f_eval(float(t), p) / f_num - 1.0))
        return at_most(1e-8, worst)

    def first_integral():
        p = ModelParams(k=1.0, y=1.0, w=0.3)
        path = continuous.ode_oracle(p, 5.0, 5000)
        worst = max(
            abs(continuous.f_prime(float(t), p) - fp) / fp
            for t, _, fp in path[500::500]
        )
        return at_most(1e-9, worst)

    def alternative_representation():
        worst = 0.0
        for k, w in ((0.1, 0.05), (1.0, 0.6), (3.0, 2.0)):
            p = ModelParams(k=k, y=1.0, w=w)
            consts = continuous.transform_constants(p)
            for t in (0.5, 2.0, 10.0):
                v_f = continuous.solve_U(consts.a + consts.b * t)
                lhs = quadrature.exp_sq_integral_between(p.scaled_slope, v_f)
                rhs = t * math.sqrt(k / 2.0) * math.exp(p.scaled_slope_sq)
                worst = max(worst, abs(lhs / rhs - 1.0))
        return at_most(1e-9, worst)

    def derivative_forms():
        pairs = [
            (continuous.g_prime_via_psi(t, k), continuous.g_prime(t, k))
            for t in (1.1, math.e, 10.0, 1e4)
            for k in (0.01, 1.0, 3.0)
        ]
        return at_most(1e-12, _max_rel(pairs))

    def envelope_bound():
        xs = np.geomspace(1e-2, profile.x_grid_max, 30)
        ok = all(
            continuous.f0(float(x))
            <= continuous.envelope_fixed_point(float(x)) * (1 + 1e-12)
            for x in xs
        )
        return holds(ok)

    return {
        "implicit_residual": implicit_residual,
        "oracle_equivalence": oracle_equivalence,
        "first_integral": first_integral,
        "alternative_representation": alternative_representation,
        "derivative_forms": derivative_forms,
        "envelope_bound": envelope_bound,
    }


def _shooting_checks(profile: VerifyProfile) -> Dict[str, Check]:
    ks = np.linspace(4.0 / profile.shooting_grid, 4.0, profile.shooting_grid)

    def w_at_kc():
        return close(W_KC, shooting.solve_w(critical.solve_kc()).w, 1e-3)

    def monotone_in_k():
        ws = [shooting.solve_w(float(k)).w for k in ks]
        big_ws = [w / math.sqrt(2.0 * k) for w, k in zip(ws, ks)]
        slopes = [w / k for w, k in zip(ws, ks)]
        ok = all(
            all(a < b for a, b in zip(seq, seq[1:])) for seq in (ws, big_ws, slopes)
        )
        return holds(ok)

    def slope_within_k():
        ok = all(0 < shooting.solve_w(float(k)).w <= k for k in ks)
        return holds(ok)

    def round_trip():
        pairs = []
        for k in ks:
            k = float(k)
            p = ModelParams(k=k, y=1.0, w=shooting.solve_w(k).w)
            pairs.append((continuous.f_eval(1.0, p), 1.0 + k))
        return at_most(1e-9, _max_rel(pairs))

    def substituted_form():
        pairs = [
            (
                shooting.matching_integral(k, w),
                shooting.matching_integral_direct(k, w).value,
            )
            for k, w in ((0.1, 0.0), (0.1, 0.05), (1.0, 0.6), (3.0, 1.0))
        ]
        return at_most(1e-8, _max_rel(pairs))

    return {
        "w_at_kc": w_at_kc,
        "monotone_in_k": monotone_in_k,
        "slope_within_k": slope_within_k,
        "round_trip": round_trip,
        "substituted_form": substituted_form,
    }


def _critical_checks(
    profile: VerifyProfile, kc_bracket: Optional[Tuple[float, float]]
) -> Dict[str, Check]:
    def k_c():
        return close(K_C, critical.solve_kc(bracket=kc_bracket), 5e-4)

    def t0_at_kc():
        kc = critical.solve_kc()
        return close(T0_KC, critical.solve_t0(kc, shooting.solve_w(kc).w), 1e-2)

    def gap_at_kc():
        kc = critical.solve_kc()
        w = shooting.solve_w(kc).w
        return close(0.0, critical.F_of(critical.solve_t0(kc, w), kc, w), 1e-3)

    def gap_peaks_at_t0():
        ok = True
        for k in (0.5, 1.0, 2.0):
            w = shooting.solve_w(k).w
            t0 = critical.solve_t0(k, w)
            peak = critical.F_of(t0, k, w)
            for delta in (0.01 * t0, 0.1 * t0):
                ok &= critical.F_of(t0 - delta, k, w) < peak
                ok &= critical.F_of(t0 + delta, k, w) < peak
        return holds(ok)

    def objective_decreasing():
        values = []
        for k in np.linspace(0.5, 2.0, 7):
            k = float(k)
            w = shooting.solve_w(k).w
            values.append(critical.F_of(critical.solve_t0(k, w), k, w))
        return holds(all(a > b for a, b in zip(values, values[1:])))

    def objective_signs():
        small = critical.kc_objective(0.05)
        large = critical.kc_objective(3.2)
        return holds(
            small > 0 > large, f"objective {small:.4g} at 0.05, {large:.4g} at 3.2"
        )

    def thresholds():
        small, large = critical.small_k_threshold(), critical.large_k_threshold()
        return holds(
            abs(small - SMALL_K) <= 1e-4 and abs(large - LARGE_K) <= 1e-3,
            f"small-k threshold {small:.5f}, large-k threshold {large:.4f}",
        )

    def psi_decreasing():
        ok = True
        for k in (0.1, 1.0, 3.0):
            values = [critical.psi(float(t), k) for t in np.geomspace(1.001, 1e8, 200)]
            ok &= all(a > b for a, b in zip(values, values[1:]))
        return holds(ok)

    def x1():
        return close(X1, critical.normalized_crossings().t1, 2e-3)

    def x2():
        return close(X2, critical.normalized_crossings().t2, 0.3)

    def minimum_ratio():
        return close(MIN_RATIO, critical.ratio_extrema_normalized().min_ratio, 1e-3)

    def minimizer():
        return close(X_MIN, critical.ratio_extrema_normalized().x_min, 1e-2)

    def maximum_ratio():
        return close(
            MAX_RATIO, critical.ratio_extrema_normalized().max_ratio_estimate, 2e-3
        )

    def alpha2():
        return close(ALPHA2, critical.normalized_ratio_upper_bound().alpha2, 1e-3)

    def inverse_g_x2():
        return at_most(0.008, critical.normalized_ratio_upper_bound().inverse_g_x2)

    def normalized_upper_bound():
        res = critical.normalized_ratio_upper_bound()
        return holds(
            res.holds, f"sweep {res.sweep_max:.6f} <= {res.bound:.6f} <= 1.12"
        )

    def bound_product():
        return close(BOUND_PRODUCT, critical.bound_chain().product, 1e-3)

    def shift_factor():
        return close(SHIFT_FACTOR, critical.bound_chain().shift_factor, 1e-4)

    def log_factor():
        return close(LOG_FACTOR, critical.bound_chain().log_factor, 1e-4)

    def sign_equivalence():
        mismatches = []
        for k in np.geomspace(0.05, 3.0, profile.sign_grid):
            k = float(k)
            w = shooting.solve_w(k).w
            p = ModelParams(k=k, y=1.0, w=w)
            for t in np.geomspace(1.5, 1e3, profile.sign_grid):
                t = float(t)
                gap = continuous.g_eval(t, k) - continuous.f_eval(t, p)
                if abs(gap) <= 1e-9 * continuous.g_eval(t, k):
                    continue
                if (critical.F_of(t, k, w) > 0) != (gap > 0):
                    mismatches.append((t, k))
        detail = f"mismatch at {mismatches[:3]}" if mismatches else None
        return holds(not mismatches, detail)

    def above_critical():
        kc = critical.solve_kc()
        worst = math.inf
        for k in (kc, 1.5, 2.0, 3.0):
            p = ModelParams(k=k, y=1.0, w=shooting.solve_w(k).w)
            for t in np.geomspace(1.01, 1e4, profile.above_critical_samples):
                t = float(t)
                worst = min(worst, continuous.f_eval(t, p) / continuous.g_eval(t, k))
        return CheckResult(
            expected=1.0, actual=worst, tolerance=1e-6, passed=worst >= 1.0 - 1e-6
        )

    def crossings_bound():
        ok = True
        for k in (0.3, 0.5, 0.8):
            points = critical.crossings(k)
            ok &= points.t2 >= points.t2_lower_bound
        return holds(ok)

    def ratio_bounds():
        # below g on [t1, t2]; above g and under the constant on [t2, 10 t2]
        highest, violations = 0.0, []
        for k in (0.3, 0.5, 0.8):
            bounds = critical.ratio_bounds(k)
            points = critical.crossings(k)
            p = ModelParams(k=k, y=1.0, w=shooting.solve_w(k).w)
            grid = np.concatenate(
                [
                    np.geomspace(points.t1, points.t2, profile.sign_grid),
                    np.geomspace(points.t2, 10.0 * points.t2, profile.sign_grid),
                ]
            )
            for t in grid:
                t = float(t)
                ratio = continuous.f_eval(t, p) / continuous.g_eval(t, k)
                highest = max(highest, ratio)
                if not bounds.lower <= ratio <= bounds.upper:
                    violations.append((k, t))
        detail = f"outside the bounds at {violations[:3]}" if violations else None
        return CheckResult(
            expected=critical.UPPER_RATIO_BOUND,
            actual=highest,
            passed=not violations,
            detail=detail,
        )

    return {
        "k_c": k_c,
        "t0_at_kc": t0_at_kc,
        "gap_at_kc": gap_at_kc,
        "gap_peaks_at_t0": gap_peaks_at_t0,
        "objective_decreasing": objective_decreasing,
        "objective_signs": objective_signs,
        "thresholds": thresholds,
        "psi_decreasing": psi_decreasing,
        "x1": x1,
        "x2": x2,
        "minimum_ratio": minimum_ratio,
        "minimizer": minimizer,
        "maximum_ratio": maximum_ratio,
        "alpha2": alpha2,
        "inverse_g_x2": inverse_g_x2,
        "normalized_upper_bound": normalized_upper_bound,
        "bound_product": bound_product,
        "shift_factor": shift_factor,
        "log_factor": log_factor,
        "sign_equivalence": sign_equivalence,
        "above_critical": above_critical,
        "crossings_bound": crossings_bound,
        "ratio_bounds": ratio_bounds,
    }


def _discrete_checks(profile: VerifyProfile) -> Dict[str, Check]:
    def properties():
        failed = []
        for k in profile.trace_k_values:
            report = discrete.check_properties(
                discrete.recursion_trace(k, profile.trace_length)
            )
            failed += [
                f"{name}@k={k}" for name, c in report.checks.items() if not c.passed
            ]
        return holds(not failed, ", ".join(failed) or None)

    def growth_sandwich():
        ok = True
        for k in profile.trace_k_values:
            trace = discrete.recursion_trace(k, profile.trace_length)
            j = np.arange(trace.n + 1)
            steps = k + np.log1p(np.arange(trace.n) * k)
            upper = np.concatenate([[1.0], 1.0 + np.cumsum(steps)])
            ok &= bool(np.all(trace.values >= (1.0 + j * k) * (1 - 1e-12)))
            ok &= bool(np.all(trace.values <= upper * (1 + 1e-12)))
        return holds(ok)

    def comparator_differences():
        ok = True
        for k in profile.trace_k_values:
            j = np.arange(2, profile.trace_length, dtype=float)
            w_j = j * np.sqrt(2 * k * np.log(j))
            w_next = (j + 1) * np.sqrt(2 * k * np.log(j + 1))
            log_next = np.log(j + 1)
            psi_next = 2 * k + k / (2 * log_next) - k * np.log(2 * k * log_next)
            bound = np.sqrt(psi_next + 2 * k * np.log(w_next))
            ok &= bool(np.all(w_next - w_j <= bound * (1 + 1e-12)))
        return holds(ok)

    def log_identity():
        worst = 0.0
        for k in (0.001, 0.01, 0.1):
            trace = discrete.recursion_trace(k, 101)
            q = discrete.log_identity_quotients(trace)[9:100]
            worst = max(worst, float(np.max(np.abs(q - 1.0))))
        return at_most(LOG_IDENTITY_TOL, worst)

    def crossing_persistence():
        res = discrete.crossing_detect(1.0, profile.crossing_n_max)
        return holds(
            res.persistent_from is not None and res.consistent_after_n0 is not False,
            f"V >= W from j={res.persistent_from}, n0 estimate {res.n0_estimate}",
        )

    checks: Dict[str, Check] = {
        "properties": properties,
        "growth_sandwich": growth_sandwich,
        "comparator_differences": comparator_differences,
        "log_identity": log_identity,
        "crossing_persistence": crossing_persistence,
    }

    diagnostics: Dict[float, ConvergenceDiagnostic] = {}

    def diagnostic(k: float) -> ConvergenceDiagnostic:
        # one streamed trace per k serves both the envelope and the band check
        if k not in diagnostics:
            diagnostics[k] = discrete.convergence_diagnostic(
                k, profile.convergence_exponents
            )
        return diagnostics[k]

    for k in profile.convergence_k_values:

        def envelope(k=k):
            diag = diagnostic(k)
            return holds(
                diag.within_envelope,
                f"scaled deviations {[round(s, 4) for s in diag.scaled_deviations]}, "
                f"monotone={diag.monotone}",
            )

        checks[f"convergence_envelope_k{k:g}"] = envelope

    if 1.0 in profile.convergence_k_values:

        def band():
            diag = diagnostic(1.0)
            return at_most(BAND_FACTOR, diag.band_factor)

        checks["convergence_band_k1"] = band
    return checks


def run_verify(
    profile: str = "full",
    kc_bracket: Optional[Tuple[float, float]] = None,
    modules: Optional[List[str]] = None,
) -> VerifyReport:
    """
    Run the checks of the selected profile.

    :param kc_bracket: search interval for the k_c check only
    """
    prof = PROFILES[profile]
    suites = {
        "quadrature": lambda: _quadrature_checks(prof),
        "continuous": lambda: _continuous_checks(prof),
        "shooting": lambda: _shooting_checks(prof),
        "critical": lambda: _critical_checks(prof, kc_bracket),
        "discrete": lambda: _discrete_checks(prof),
    }
    report = VerifyReport(profile=profile)
    for module, build in suites.items():
        if modules and module not in modules:
            continue
        results: Dict[str, CheckResult] = {}
        with ContextualizedLogging(suite=module), PerformanceTracker(module) as perf:
            for name, check in build().items():
                try:
                    results[name] = check()
                except (EmdenflowError, ArithmeticError, ValueError) as exc:
                    results[name] = CheckResult(passed=False, detail=str(exc))
                if not results[name].passed:
                    logger.warning(
                        "Check failed", check=name, detail=results[name].detail
                    )
        failed = [n for n, r in results.items() if not r.passed]
        logger.info(perf.describe(), failed=failed)
        report.modules[module] = results
    return report
