"""Initial slope w(k) such that the solution with f(0) = 1, f'(0) = w hits f(1) = 1 + k.

Integrating the first integral f'² = w² + 2k·ln f turns the boundary condition into
the matching condition

    M(k, w) = ∫_1^{1+k} (w² + 2k·ln s)^{-1/2} ds = 1

and the substitution v² = W² + ln s, W = w/√(2k), rewrites the left-hand side as
√(2/k)·e^{-W²}·∫_W^{V1} e^{v²} dv with V1² = W² + ln(1 + k).
"""
import math
from typing import Optional

import scipy.optimize
from structlog import get_logger

from emdenflow.core.errors import (
    BracketError,
    ConvergenceError,
    EmdenflowError,
    require,
)
from emdenflow.core.settings import get_settings
from emdenflow.core.types import QuadratureResult, ShootingResult
from emdenflow.quadrature import adaptive_quad, exp_sq_integral_between_scaled
from emdenflow.utils.cache import cached_solver

logger = get_logger(__name__)

# below this W the closed-form slope has no cancellation
_CLOSED_FORM_SLOPE_LIMIT = 1.0


def _check_kw(k: float, w: float) -> None:
    require(math.isfinite(k) and k > 0, f"k must be positive, got {k!r}")
    require(math.isfinite(w) and w >= 0, f"w must be non-negative, got {w!r}")


def _endpoints(k: float, w: float):
    big_w = w / math.sqrt(2.0 * k)
    return big_w, math.sqrt(big_w * big_w + math.log1p(k))


def matching_integral(k: float, w: float) -> float:
    """M(k, w), through the exponential-square form; finite at w = 0."""
    _check_kw(k, w)
    big_w, v1 = _endpoints(k, w)
    # e^{-W²}∫_W^{V1} e^{v²} dv = (1 + k)·e^{-V1²}∫_W^{V1} e^{v²} dv
    return math.sqrt(2.0 / k) * (1.0 + k) * exp_sq_integral_between_scaled(big_w, v1)


def matching_integral_direct(k: float, w: float) -> QuadratureResult:
    """M(k, w) integrated in the original variable s, singular at s=1 when w=0."""
    _check_kw(k, w)
    w2 = w * w
    return adaptive_quad(
        lambda s: 1.0 / math.sqrt(w2 + 2.0 * k * math.log(s)), 1.0, 1.0 + k
    )


def matching_integral_slope(k: float, w: float) -> float:
    """
    ∂M/∂w = -w·∫_1^{1+k} (w² + 2k·ln s)^{-3/2} ds, which tends to -1/k as
    w → 0.
    """
    _check_kw(k, w)
    if w == 0:
        return -1.0 / k
    big_w, v1 = _endpoints(k, w)
    if big_w <= _CLOSED_FORM_SLOPE_LIMIT:
        j = (1.0 + k) * exp_sq_integral_between_scaled(big_w, v1)
        return (-2.0 * big_w * j + (1.0 + k) * big_w / v1 - 1.0) / k
    v1_sq = v1 * v1
    res = adaptive_quad(lambda v: math.exp(v * v - v1_sq) / (v * v), big_w, v1)
    return -w * 2.0 * (1.0 + k) * res.value / (2.0 * k) ** 1.5


@cached_solver("solve_w")
def _solve_w(k: float, tol: float, max_iterations: int) -> ShootingResult:
    def residual(w):
        return matching_integral(k, w) - 1.0

    r_lo, r_hi = residual(0.0), residual(k)
    if not (r_lo > 0 > r_hi):
        raise BracketError("matching condition", 0.0, k, r_lo, r_hi)

    w, coarse = scipy.optimize.brentq(
        residual,
        0.0,
        k,
        xtol=1e-6 * k,
        maxiter=max_iterations,
        full_output=True,
        disp=False,
    )
    iterations = coarse.iterations
    try:
        w_newton, polish = scipy.optimize.newton(
            residual,
            w,
            fprime=lambda x: matching_integral_slope(k, x),
            tol=tol * k,
            maxiter=max_iterations,
            full_output=True,
            disp=False,
        )
        iterations += polish.iterations
        newton_ok = polish.converged and 0 < w_newton <= k
    except (EmdenflowError, ArithmeticError, ValueError):
        newton_ok = False
    if newton_ok and abs(residual(w_newton)) <= tol:
        w = w_newton
    else:
        logger.debug("Newton polish rejected, refining by bracketing", k=k)
        w, fine = scipy.optimize.brentq(
            residual,
            0.0,
            k,
            xtol=1e-300,
            maxiter=max_iterations,
            full_output=True,
            disp=False,
        )
        iterations += fine.iterations

    res = residual(w)
    if not 0 < w <= k:
        raise ConvergenceError(f"w({k!r}) = {w!r} left the interval (0, k]")
    if abs(res) > tol:
        raise ConvergenceError(
            f"w({k!r}) residual {res!r} exceeds the tolerance {tol!r}"
        )
    logger.debug("Solved shooting problem", k=k, w=w, residual=res)
    return ShootingResult(k=k, w=w, residual=res, iterations=iterations)


def solve_w(k: float, tol: Optional[float] = None) -> ShootingResult:
    """
    The unique w in (0, k] with M(k, w) = 1.

    The root is bracketed on [0, k], located by Brent's method and polished by
    Newton steps using matching_integral_slope; a rejected polish falls back to
    bracketing at full precision.
    """
    require(math.isfinite(k) and k > 0, f"k must be positive, got {k!r}")
    solver = get_settings().solver
    if tol is None:
        tol = solver.tol
    require(tol > 0, f"tol must be positive, got {tol!r}")
    return _solve_w(k, tol, solver.max_iterations)


def w_sensitivity(k: float) -> float:
    """dw/dk along the solution curve of M(k, w(k)) = 1."""
    w = solve_w(k).w
    w2 = w * w
    boundary = 1.0 / math.sqrt(w2 + 2.0 * k * math.log1p(k))
    interior = adaptive_quad(
        lambda s: math.log(s) * (w2 + 2.0 * k * math.log(s)) ** -1.5, 1.0, 1.0 + k
    ).value
    return -(boundary - interior) / matching_integral_slope(k, w)
