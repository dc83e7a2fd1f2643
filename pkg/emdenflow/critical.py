"""Where the solution f (with f(1) = 1 + k) dips below its approximant g.

For y = 1 the signed gap between f and g at time t is

    F(t, k) = -t·√(k/2)·e^{W²} + ∫_W^{(W² + ln g(t))^{1/2}} e^{v²} dv

with F ≤ 0 exactly where f(t) ≥ g(t). F(·, k) is largest at t0(k), the solution
of ψ(t) = w(k)², and k ↦ F(t0(k), k) changes sign once, at the critical
coefficient k_c. Below k_c the gap is positive on (t1(k), t2(k)).

Root finding runs on u = ln t and on the normalized gap

    Φ(u) = F / (t·√(k/2)·e^{W²}) = 2√u·e^{-V²}∫_W^V e^{v²} dv - 1,
    V² = W² + ln g,

which carries the sign of F and stays of order one for every t.
"""
import math
from typing import Optional, Tuple

import numpy as np
import scipy.optimize
from structlog import get_logger

from emdenflow.continuous import (
    check_t,
    f0,
    g_eval,
    log_g,
    psi_from_log,
    solve_U,
    transform_constants,
)
from emdenflow.core.errors import (
    BracketError,
    ConvergenceError,
    NumericalError,
    require,
)
from emdenflow.core.settings import get_settings
from emdenflow.core.types import (
    BoundChain,
    CriticalReport,
    CrossingPoints,
    ModelParams,
    NormalizedExtrema,
    NormalizedUpperBound,
    RatioBounds,
    RatioFactors,
    Regime,
)
from emdenflow.quadrature import (
    exp_sq_integral_between,
    exp_sq_integral_between_scaled,
    guard_exponent,
)
from emdenflow.shooting import solve_w
from emdenflow.utils.cache import cached_solver

logger = get_logger(__name__)

UPPER_RATIO_BOUND = 1.21
NORMALIZED_UPPER_CONSTANT = 1.12
NORMALIZED_SWEEP_END = 1e6

_EPS_RTOL = 4 * np.finfo(float).eps


def _check_k(k: float) -> None:
    require(math.isfinite(k) and k > 0, f"k must be positive, got {k!r}")


def psi(t: float, k: float) -> float:
    """ψ(t) = 2k + k/(2 ln t) - k·ln(2k·ln t), strictly decreasing on t > 1."""
    check_t(t, lower=1.0, strict=True)
    _check_k(k)
    return psi_from_log(math.log(t), k)


def psi_log(log_t: float, k: float) -> float:
    """ψ as a function of u = ln t > 0, usable far past the largest float t."""
    require(
        math.isfinite(log_t) and log_t > 0, f"ln t must be positive, got {log_t!r}"
    )
    _check_k(k)
    return psi_from_log(log_t, k)


def solve_psi_log(k: float, level: float) -> float:
    """The u = ln t > 0 with ψ = level; ψ sweeps all reals once as u grows."""
    _check_k(k)
    require(math.isfinite(level), f"level must be finite, got {level!r}")
    expansions = get_settings().solver.bracket_expansions

    def gap(u):
        return psi_from_log(u, k) - level

    lo, hi = 1.0, 1.0
    if gap(1.0) > 0:
        for _ in range(expansions):
            hi *= 2.0
            if gap(hi) < 0:
                break
            lo = hi
        else:
            raise BracketError("ψ level set", lo, hi, gap(lo), gap(hi))
    else:
        for _ in range(expansions):
            lo /= 2.0
            if gap(lo) > 0:
                break
            hi = lo
        else:
            raise BracketError("ψ level set", lo, hi, gap(lo), gap(hi))
    if gap(hi) == 0:
        return hi
    return scipy.optimize.brentq(gap, lo, hi, xtol=1e-300, rtol=_EPS_RTOL)


def solve_t0(k: float, w: float) -> float:
    """
    t0(k) > 1 solving ψ(t0) = w², the maximizer of F(·, k).

    :raises OverflowGuardError: when t0 is too large to represent
    """
    require(math.isfinite(w) and w >= 0, f"w must be non-negative, got {w!r}")
    log_t0 = solve_psi_log(k, w * w)
    guard_exponent(log_t0)
    return math.exp(log_t0)


def normalized_gap_log(log_t: float, k: float, w: float) -> float:
    """Φ at u = ln t; -1 wherever g(t) ≤ 1."""
    require(log_t > 0, f"ln t must be positive, got {log_t!r}")
    big_w = w / math.sqrt(2.0 * k)
    lg = log_t + 0.5 * math.log(2.0 * k * log_t)
    if lg <= 0:
        return -1.0
    v = math.sqrt(big_w * big_w + lg)
    return 2.0 * math.sqrt(log_t) * exp_sq_integral_between_scaled(big_w, v) - 1.0


def F_of(t: float, k: float, w: float) -> float:
    """
    F(t, k) = ∫_{V_f}^{V_g} e^{v²} dv with V_f² = W² + ln f(t) and
    V_g² = W² + ln g(t).

    Where W² + ln g(t) < 0, V_g is clamped at 0; the value stays negative, as
    f(t) ≥ 1 > g(t) there.
    """
    check_t(t, lower=1.0)
    _check_k(k)
    p = ModelParams(k=k, y=1.0, w=w)
    consts = transform_constants(p)
    v_f = solve_U(consts.a + consts.b * t)
    vg_sq = p.scaled_slope_sq + log_g(t, k) if t > 1 else 0.0
    v_g = math.sqrt(max(vg_sq, 0.0))
    if v_g >= v_f:
        return exp_sq_integral_between(v_f, v_g)
    return -exp_sq_integral_between(v_g, v_f)


def F_of_explicit(t: float, k: float, w: float) -> float:
    """
    F(t, k) as -t·√(k/2)·e^{W²} + ∫_W^{V_g} e^{v²} dv, defined where g(t) ≥ 1.
    """
    check_t(t, lower=1.0, strict=True)
    _check_k(k)
    lg = log_g(t, k)
    require(lg >= 0, f"explicit gap form needs g(t) >= 1, got ln g = {lg!r}")
    w2 = w * w / (2.0 * k)
    guard_exponent(w2)
    return -t * math.sqrt(k / 2.0) * math.exp(w2) + exp_sq_integral_between(
        math.sqrt(w2), math.sqrt(w2 + lg)
    )


def gap_slope(t: float, k: float, w: float) -> float:
    """∂F/∂t; positive before t0(k), negative after."""
    check_t(t, lower=1.0, strict=True)
    _check_k(k)
    w2 = w * w / (2.0 * k)
    lg = log_g(t, k)
    require(w2 + lg > 0, f"∂F/∂t needs W² + ln g(t) > 0 at t={t!r}")
    guard_exponent(w2)
    psi_t = psi_from_log(math.log(t), k)
    return (
        math.exp(w2)
        * math.sqrt(k / 2.0)
        * (math.sqrt((psi_t / (2.0 * k) + lg) / (w2 + lg)) - 1.0)
    )


def kc_objective(k: float) -> float:
    """Sign of F(t0(k), k), through Φ: positive below k_c, negative above."""
    w = solve_w(k).w
    return normalized_gap_log(solve_psi_log(k, w * w), k, w)


@cached_solver("solve_kc")
def _solve_kc(lo: float, hi: float, tol: float, max_iterations: int) -> float:
    f_lo, f_hi = kc_objective(lo), kc_objective(hi)
    if not (f_lo > 0 > f_hi):
        raise BracketError("critical coefficient", lo, hi, f_lo, f_hi)
    kc, r = scipy.optimize.bisect(
        kc_objective,
        lo,
        hi,
        xtol=tol,
        maxiter=max_iterations,
        full_output=True,
        disp=False,
    )
    if not r.converged:
        raise ConvergenceError(f"critical coefficient did not converge: {r.flag}")
    logger.info("Solved critical coefficient", k_c=kc, iterations=r.iterations)
    return kc


def solve_kc(
    tol: Optional[float] = None, bracket: Optional[Tuple[float, float]] = None
) -> float:
    """
    The critical coefficient k_c where F(t0(k), k) vanishes.

    :param bracket: (low, high) search interval, defaults to the critical settings
    :raises BracketError: when the objective does not change sign on the bracket
    """
    settings = get_settings()
    if tol is None:
        tol = settings.critical.kc_tol
    lo, hi = bracket or (settings.critical.kc_low, settings.critical.kc_high)
    require(0 < lo < hi, f"k_c bracket must satisfy 0 < low < high, got {lo}, {hi}")
    return _solve_kc(lo, hi, tol, settings.solver.max_iterations)


def _crossings_for(
    k: float, w: float, log_t0: Optional[float] = None
) -> Tuple[float, float, float]:
    """(ln t1, ln t0, ln t2) for the gap with slope w"""
    expansions = get_settings().solver.bracket_expansions
    if log_t0 is None:
        log_t0 = solve_psi_log(k, w * w)

    def phi(u):
        return normalized_gap_log(u, k, w)

    peak = phi(log_t0)
    if peak <= 0:
        raise BracketError("gap maximum", log_t0, log_t0, peak, peak)

    lo = log_t0
    for _ in range(expansions):
        lo /= 2.0
        if phi(lo) < 0:
            break
    else:
        raise BracketError("lower crossing", lo, log_t0, phi(lo), peak)
    hi = log_t0
    for _ in range(expansions):
        hi *= 2.0
        if phi(hi) < 0:
            break
    else:
        raise BracketError("upper crossing", log_t0, hi, peak, phi(hi))

    log_t1 = scipy.optimize.brentq(phi, lo, log_t0, xtol=1e-300, rtol=_EPS_RTOL)
    log_t2 = scipy.optimize.brentq(phi, log_t0, hi, xtol=1e-300, rtol=_EPS_RTOL)
    return log_t1, log_t0, log_t2


def t2_lower_bound_log(k: float, kc: float) -> float:
    """ln of the guaranteed lower bound exp(e^{2-k_c}/(2k)) on t2(k)"""
    return math.exp(2.0 - kc) / (2.0 * k)


def crossings(k: float) -> CrossingPoints:
    """t1(k) < t0(k) < t2(k) where f meets g, for 0 < k < k_c."""
    _check_k(k)
    kc = solve_kc()
    require(k < kc, f"f stays above g for k >= k_c = {kc:.6f}, got k={k!r}")
    w = solve_w(k).w
    log_t1, log_t0, log_t2 = _crossings_for(k, w)
    guard_exponent(log_t2)
    bound = t2_lower_bound_log(k, kc)
    if log_t2 < bound * (1 - 1e-12):
        raise NumericalError(
            f"t2({k!r}) = exp({log_t2!r}) is below its lower bound exp({bound!r})"
        )
    return CrossingPoints(
        k=k,
        t1=math.exp(log_t1),
        t0=math.exp(log_t0),
        t2=math.exp(log_t2),
        t2_lower_bound=math.exp(bound),
    )


@cached_solver("normalized_crossings")
def normalized_crossings() -> CrossingPoints:
    """Crossings x1 < x2 of f0 and g(·; 1), i.e. k = 1 and w = 0."""
    log_x1, log_x0, log_x2 = _crossings_for(1.0, 0.0)
    return CrossingPoints(
        k=1.0, t1=math.exp(log_x1), t0=math.exp(log_x0), t2=math.exp(log_x2)
    )


def normalized_ratio(x: float) -> float:
    """f0(x)/g(x; 1)"""
    check_t(x, lower=1.0, strict=True)
    return f0(x) / g_eval(x, 1.0)


@cached_solver("normalized_minimum")
def normalized_minimum() -> Tuple[float, float]:
    """(x_min, min f0/g(·; 1)) by golden-section search in ln x over [x1, x2]"""
    points = normalized_crossings()
    lo, hi = math.log(points.t1), math.log(points.t2)
    res = scipy.optimize.minimize_scalar(
        lambda u: normalized_ratio(math.exp(u)),
        bracket=(lo, 0.5 * (lo + hi), hi),
        method="golden",
        tol=1e-10,
    )
    if not res.get("success", True):
        raise ConvergenceError(f"ratio minimum search failed: {res.message}")
    return math.exp(res.x), float(res.fun)


@cached_solver("ratio_extrema_normalized")
def ratio_extrema_normalized(grid_points: int = 4001) -> NormalizedExtrema:
    """
    Minimum of f0/g(·; 1) on [x1, x2] and the largest value sampled on a log grid
    over [x2, 10⁶].

    The ratio is very flat around its maximum; the maximizer is reported to two
    significant figures.
    """
    x_min, min_ratio = normalized_minimum()
    grid = np.geomspace(normalized_crossings().t2, NORMALIZED_SWEEP_END, grid_points)
    ratios = np.array([normalized_ratio(float(x)) for x in grid])
    i_max = int(np.argmax(ratios))
    return NormalizedExtrema(
        x_min=x_min,
        min_ratio=min_ratio,
        x_max_estimate=float(f"{grid[i_max]:.2g}"),
        max_ratio_estimate=float(ratios[i_max]),
    )


def _log_scale(k: float) -> float:
    # ln √(2/k)
    return 0.5 * math.log(2.0 / k)


def second_regime_constant() -> float:
    """min f0/g(·; 1) scaled by (ln √(2/k_c))^{1/2}"""
    _, min_ratio = normalized_minimum()
    return min_ratio * math.sqrt(_log_scale(solve_kc()))


def ratio_bounds(k: float) -> RatioBounds:
    """Bounds on f(t)/g(t) for 0 < k < k_c."""
    _check_k(k)
    kc = solve_kc()
    require(k < kc, f"ratio bounds hold for k < k_c = {kc:.6f}, got k={k!r}")
    scale = math.sqrt(_log_scale(k))
    return RatioBounds(
        k=k,
        lower=0.5 / scale,
        upper=UPPER_RATIO_BOUND,
        second_regime_lower=second_regime_constant() / scale,
    )


@cached_solver("normalized_ratio_upper_bound")
def normalized_ratio_upper_bound() -> NormalizedUpperBound:
    """
    f0(x)/g(x; 1) ≤ α2 + 1/g(x2; 1) ≤ 1.12 for x ≥ x2, where α2 solves
    (x2^{α²} - 1)/α = g(x2; 1).
    """
    x2 = normalized_crossings().t2
    g_x2 = g_eval(x2, 1.0)
    log_x2 = math.log(x2)
    alpha2 = scipy.optimize.brentq(
        lambda a: math.expm1(a * a * log_x2) / a - g_x2,
        1.0,
        1.5,
        xtol=1e-300,
        rtol=_EPS_RTOL,
    )
    bound = alpha2 + 1.0 / g_x2
    sweep_max = ratio_extrema_normalized().max_ratio_estimate
    return NormalizedUpperBound(
        alpha2=alpha2,
        inverse_g_x2=1.0 / g_x2,
        bound=bound,
        constant=NORMALIZED_UPPER_CONSTANT,
        sweep_max=sweep_max,
        holds=sweep_max <= bound <= NORMALIZED_UPPER_CONSTANT,
    )


def bound_chain() -> BoundChain:
    """The factors of the upper bound on f/g, evaluated at the critical coefficient."""
    kc = solve_kc()
    wc = solve_w(kc).w
    t0c = solve_t0(kc, wc)
    shift = 1.0 + wc / (kc * t0c)
    log_factor = math.sqrt(
        1.0
        + (wc * wc / (2.0 * kc) + 0.5 * math.log(kc) + wc / (t0c * kc))
        / math.log(t0c)
    )
    return BoundChain(
        normalized_factor=NORMALIZED_UPPER_CONSTANT,
        shift_factor=shift,
        log_factor=log_factor,
        product=NORMALIZED_UPPER_CONSTANT * shift * log_factor,
        slope_ratio_at_kc=wc / kc,
        shift_floor=math.sqrt(kc) * math.exp(t2_lower_bound_log(kc, kc)),
        second_regime_constant=second_regime_constant(),
    )


def small_k_threshold() -> float:
    """Root of (-ln k)^{1/2} = 3/2 + √k; the small-k sign argument holds below it."""
    return scipy.optimize.brentq(
        lambda k: math.sqrt(-math.log(k)) - 1.5 - math.sqrt(k), 1e-4, 0.5
    )


def large_k_threshold() -> float:
    """Root of 2k + 1 - 2k·ln k = 0; the large-k sign argument holds above it."""
    return scipy.optimize.brentq(
        lambda k: 2.0 * k + 1.0 - 2.0 * k * math.log(k), math.e, 10.0
    )


def ratio_factors(t: float, k: float) -> RatioFactors:
    """
    f(t)/g(t) = [f0(x)/g(x; 1)]·[c·x/(t√k)]·(ln x/ln t)^{1/2} with x = a + b·t.
    """
    check_t(t, lower=1.0, strict=True)
    _check_k(k)
    consts = transform_constants(ModelParams(k=k, y=1.0, w=solve_w(k).w))
    x = consts.a + consts.b * t
    require(x > 1, f"normalized argument a + b·t must exceed 1, got {x!r}")
    normalized = normalized_ratio(x)
    shift = consts.c * x / (t * math.sqrt(k))
    log_factor = math.sqrt(math.log(x) / math.log(t))
    return RatioFactors(
        t=t,
        k=k,
        normalized=normalized,
        shift=shift,
        log=log_factor,
        product=normalized * shift * log_factor,
    )


def critical_report(k: float) -> CriticalReport:
    """w(k), t0(k), F(t0(k), k), the regime and, below k_c, crossings and bounds."""
    _check_k(k)
    w = solve_w(k).w
    log_t0 = solve_psi_log(k, w * w)
    guard_exponent(log_t0)
    t0 = math.exp(log_t0)
    gap = F_of(t0, k, w)
    if normalized_gap_log(log_t0, k, w) <= 0:
        logger.debug("f stays above g", k=k, t0=t0, F_at_t0=gap)
        return CriticalReport(
            k=k,
            w=w,
            t0=t0,
            F_at_t0=gap,
            regime=Regime.above_critical,
            lower_ratio_bound=1.0,
        )
    log_t1, _, log_t2 = _crossings_for(k, w, log_t0=log_t0)
    guard_exponent(log_t2)
    kc = solve_kc()
    guard_exponent(t2_lower_bound_log(k, kc))
    logger.debug("f dips below g", k=k, t0=t0, F_at_t0=gap)
    return CriticalReport(
        k=k,
        w=w,
        t0=t0,
        F_at_t0=gap,
        regime=Regime.below_critical,
        t1=math.exp(log_t1),
        t2=math.exp(log_t2),
        t2_lower_bound=math.exp(t2_lower_bound_log(k, kc)),
        lower_ratio_bound=0.5 / math.sqrt(_log_scale(k)),
        upper_ratio_bound=UPPER_RATIO_BOUND,
    )
