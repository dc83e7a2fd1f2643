"""Exponential-square integrals and the general-purpose quadrature engine.

I(y) = ∫₀^y e^{u²} du is carried through the Dawson integral
D(y) = e^{-y²} I(y), so that the huge factor e^{y²} is only ever formed once,
under the overflow guard.
"""
import math
from typing import Callable, Optional

import scipy.integrate
import scipy.special
from structlog import get_logger

from emdenflow.core.errors import ConvergenceError, OverflowGuardError, require
from emdenflow.core.settings import get_settings
from emdenflow.core.types import QuadratureResult

logger = get_logger(__name__)

# accepted gap between the requested tolerance and what QUADPACK reaches when it
# stops on roundoff
ROUNDOFF_SLACK = 1e4

# QUADPACK reports failures only through its message; roundoff-limited results
# within ROUNDOFF_SLACK of the request are kept
_ROUNDOFF_MARKER = "roundoff"


def _check_nonnegative(name: str, y: float) -> None:
    require(math.isfinite(y), f"{name} must be finite, got {y!r}")
    require(y >= 0, f"{name} must be non-negative, got {y!r}")


def guard_exponent(exponent: float, overflow_limit: Optional[float] = None) -> None:
    """Raise when e^exponent would not be representable."""
    if overflow_limit is None:
        overflow_limit = get_settings().quadrature.overflow_limit
    if exponent > overflow_limit:
        raise OverflowGuardError(exponent, overflow_limit)


def dawson(y: float) -> float:
    return float(scipy.special.dawsn(y))


def exp_sq_integral(y: float, overflow_limit: Optional[float] = None) -> float:
    """
    ∫₀^y e^{u²} du = e^{y²}·D(y)

    :param overflow_limit: largest admissible y², defaults to the quadrature settings
    """
    _check_nonnegative("y", y)
    if y == 0:
        return 0.0
    guard_exponent(y * y, overflow_limit)
    return math.exp(y * y) * dawson(y)


def log_exp_sq_integral(y: float) -> float:
    """ln ∫₀^y e^{u²} du, valid far beyond the overflow guard."""
    _check_nonnegative("y", y)
    require(y > 0, "the logarithm of the empty integral is undefined")
    return y * y + math.log(dawson(y))


def exp_sq_integral_between_scaled(
    lo: float,
    hi: float,
    tol: Optional[float] = None,
    direct_window: Optional[float] = None,
) -> float:
    """
    e^{-hi²} ∫_lo^hi e^{v²} dv, which lies in [0, D(hi)] and never overflows.
    """
    _check_nonnegative("lo", lo)
    _check_nonnegative("hi", hi)
    require(lo <= hi, f"expected lo <= hi, got ({lo!r}, {hi!r})")
    if lo == hi:
        return 0.0
    settings = get_settings().quadrature
    if direct_window is None:
        direct_window = settings.direct_window
    gap = (hi - lo) * (hi + lo)
    if gap >= direct_window:
        return dawson(hi) - math.exp(-gap) * dawson(lo)
    # the two Dawson terms nearly cancel here
    hi2 = hi * hi
    res = adaptive_quad(
        lambda v: math.exp(v * v - hi2),
        lo,
        hi,
        tol=tol,
        abs_tol=0.0,
    )
    return res.value


def exp_sq_integral_between(
    lo: float,
    hi: float,
    tol: Optional[float] = None,
    overflow_limit: Optional[float] = None,
) -> float:
    """∫_lo^hi e^{v²} dv for 0 ≤ lo ≤ hi"""
    _check_nonnegative("hi", hi)
    guard_exponent(hi * hi, overflow_limit)
    return math.exp(hi * hi) * exp_sq_integral_between_scaled(lo, hi, tol=tol)


def adaptive_quad(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Optional[float] = None,
    abs_tol: Optional[float] = None,
    max_intervals: Optional[int] = None,
) -> QuadratureResult:
    """
    Integrate f over [lo, hi] with globally adaptive Gauss-Kronrod subdivision
    and extrapolation (QUADPACK qags). Integrable endpoint singularities are
    allowed: the rule never evaluates f at the endpoints.

    :param tol: relative tolerance, defaults to the quadrature settings
    :param abs_tol: absolute tolerance, defaults to `tol`
    :raises ConvergenceError: when the subdivision budget is exhausted or the
        estimate is unusable
    """
    require(
        math.isfinite(lo) and math.isfinite(hi),
        f"integration bounds must be finite, got ({lo!r}, {hi!r})",
    )
    require(lo < hi, f"expected lo < hi, got ({lo!r}, {hi!r})")
    settings = get_settings().quadrature
    if tol is None:
        tol = settings.tol
    if abs_tol is None:
        abs_tol = tol
    if max_intervals is None:
        max_intervals = settings.max_intervals

    out = scipy.integrate.quad(
        f,
        lo,
        hi,
        epsabs=abs_tol,
        epsrel=tol,
        limit=max_intervals,
        full_output=1,
    )
    value, abserr, info = out[0], out[1], out[2]
    neval = int(info["neval"])
    if not math.isfinite(value) or not math.isfinite(abserr):
        raise ConvergenceError(f"quadrature on [{lo!r}, {hi!r}] is not finite")
    if len(out) > 3:
        reason = " ".join(str(out[3]).split())
        requested = max(abs_tol, tol * abs(value))
        if (
            _ROUNDOFF_MARKER not in reason.lower()
            or abserr > ROUNDOFF_SLACK * requested
        ):
            raise ConvergenceError(
                f"quadrature on [{lo!r}, {hi!r}] failed: {reason} "
                f"(estimate {value!r}, error {abserr!r})"
            )
        logger.warning(
            "Quadrature stopped short of tolerance",
            lo=lo,
            hi=hi,
            reason=reason,
            abs_error_estimate=abserr,
            requested=requested,
        )
    logger.debug(
        "Quadrature done", lo=lo, hi=hi, value=value, error=abserr, evaluations=neval
    )
    return QuadratureResult(
        value=value, abs_error_estimate=abserr, evaluations=max(neval, 1)
    )
