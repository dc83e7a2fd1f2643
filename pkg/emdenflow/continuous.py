"""Implicit solution of f'' = k/f, its approximant g and the leading asymptotics.

With I(y) = ∫₀^y e^{u²} du, the normalized solution is f0(x) = exp(U(x)²)
where I(U(x)) = x/√2, and the solution with f(0) = y, f'(0) = w is
f(t) = c·f0(a + b·t).
"""
import math
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.optimize
from structlog import get_logger

from emdenflow.core.errors import (
    ConvergenceError,
    NumericalError,
    OverflowGuardError,
    require,
)
from emdenflow.core.settings import get_settings
from emdenflow.core.types import ModelParams, TransformConstants
from emdenflow.quadrature import dawson, exp_sq_integral, log_exp_sq_integral

logger = get_logger(__name__)

SQRT2 = math.sqrt(2.0)


def check_t(t: float, lower: float = 0.0, strict: bool = False) -> None:
    require(math.isfinite(t), f"t must be finite, got {t!r}")
    if strict:
        require(t > lower, f"t must be > {lower}, got {t!r}")
    else:
        require(t >= lower, f"t must be >= {lower}, got {t!r}")


def solve_U(x: float, tol: Optional[float] = None) -> float:
    """
    Solve I(U) = x/√2 for U ≥ 0.

    The root is bracketed by [0, 1 + (ln(1 + z²))^{1/2}] with z = x√2 and located
    by Brent's method on the scaled residual D(U) - (x/√2)·e^{-U²}, which stays
    bounded for every U.

    :param tol: accepted |I(U) - x/√2| relative to max(1, x/√2)
    """
    require(math.isfinite(x), f"x must be finite, got {x!r}")
    require(x >= 0, f"x must be non-negative, got {x!r}")
    if x == 0:
        return 0.0
    settings = get_settings()
    if tol is None:
        tol = settings.solver.tol
    limit = settings.quadrature.overflow_limit
    c = x / SQRT2
    u_cap = math.sqrt(limit)
    if log_exp_sq_integral(u_cap) < math.log(c):
        raise OverflowGuardError(math.log(c), limit)

    def residual(u):
        return dawson(u) - c * math.exp(-u * u)

    z = x * SQRT2
    hi = min(1.0 + math.sqrt(math.log1p(z * z)), u_cap)
    while residual(hi) < 0 and hi < u_cap:
        hi = min(2.0 * hi, u_cap)

    u, r = scipy.optimize.brentq(
        residual,
        0.0,
        hi,
        xtol=1e-300,
        rtol=4 * np.finfo(float).eps,
        maxiter=settings.solver.max_iterations,
        full_output=True,
        disp=False,
    )
    if not r.converged:
        raise ConvergenceError(f"U({x!r}) did not converge: {r.flag}")
    err = abs(exp_sq_integral(u, overflow_limit=limit) - c)
    if err > tol * max(1.0, c):
        raise ConvergenceError(
            f"U({x!r}) residual {err!r} exceeds tolerance {tol * max(1.0, c)!r}"
        )
    return u


def f0(x: float) -> float:
    u = solve_U(x)
    return math.exp(u * u)


def transform_constants(p: ModelParams) -> TransformConstants:
    w2 = p.scaled_slope_sq
    growth = math.exp(w2)
    return TransformConstants(
        a=SQRT2 * exp_sq_integral(p.scaled_slope),
        b=math.sqrt(p.k) / p.y * growth,
        c=p.y / growth,
    )


def log_growth(t: float, p: ModelParams) -> float:
    """ln(f(t)/y) = U(a + b·t)² - W², computed without forming f."""
    check_t(t)
    if t == 0:
        return 0.0
    consts = transform_constants(p)
    u = solve_U(consts.a + consts.b * t)
    return max(u * u - p.scaled_slope_sq, 0.0)


def f_eval(t: float, p: ModelParams) -> float:
    """f(t) = c·f0(a + b·t); f(0) is y exactly."""
    check_t(t)
    if t == 0:
        return p.y
    return p.y * math.exp(log_growth(t, p))


def f_prime(t: float, p: ModelParams) -> float:
    """f'(t) from the first integral f'² = w² + 2k·ln(f/y)."""
    check_t(t)
    if t == 0:
        return p.w
    return math.sqrt(p.w * p.w + 2.0 * p.k * log_growth(t, p))


def g_eval(t: float, k: float) -> float:
    """g(t) = t·(2k·ln t)^{1/2}"""
    check_t(t, lower=1.0)
    require(k > 0, f"k must be positive, got {k!r}")
    if t == 1:
        return 0.0
    return t * math.sqrt(2.0 * k * math.log(t))


def log_g(t: float, k: float) -> float:
    """ln g(t) = ln t + ½·ln(2k·ln t), for t > 1."""
    check_t(t, lower=1.0, strict=True)
    return _log_g_from_log(math.log(t), k)


def _log_g_from_log(log_t: float, k: float) -> float:
    return log_t + 0.5 * math.log(2.0 * k * log_t)


def psi_from_log(log_t: float, k: float) -> float:
    # ψ expressed through L = ln t: 2k + k/(2L) - k·ln(2kL)
    return 2.0 * k + k / (2.0 * log_t) - k * math.log(2.0 * k * log_t)


def g_prime(t: float, k: float) -> float:
    check_t(t, lower=1.0, strict=True)
    require(k > 0, f"k must be positive, got {k!r}")
    log_t = math.log(t)
    return math.sqrt(2.0 * k * log_t + 2.0 * k + k / (2.0 * log_t))


def g_prime_via_psi(t: float, k: float) -> float:
    """g'(t) = (ψ(t) + 2k·ln g(t))^{1/2}"""
    check_t(t, lower=1.0, strict=True)
    require(k > 0, f"k must be positive, got {k!r}")
    log_t = math.log(t)
    return math.sqrt(psi_from_log(log_t, k) + 2.0 * k * _log_g_from_log(log_t, k))


def asymptotic_f(t: float, k: float) -> float:
    """Leading term of f for large t; coincides with g."""
    check_t(t, lower=math.e, strict=True)
    return g_eval(t, k)


def asymptotic_f0(x: float) -> float:
    """Leading term z·(ln z)^{1/2} of f0, z = x√2."""
    require(math.isfinite(x), f"x must be finite, got {x!r}")
    z = x * SQRT2
    require(z > math.e, f"asymptotic form needs x√2 > e, got x={x!r}")
    return z * math.sqrt(math.log(z))


def envelope_fixed_point(x: float) -> float:
    """
    The fixed point z > 1 of z = 1 + x·(2 ln z)^{1/2}; f0(x) never exceeds it.
    """
    require(math.isfinite(x) and x > 0, f"x must be positive, got {x!r}")
    solver = get_settings().solver

    def gap(z):
        return z - 1.0 - x * math.sqrt(2.0 * math.log(z))

    lo = 1.0 + min(0.5 * x * x, 0.5)
    hi = 2.0 * lo
    for _ in range(solver.bracket_expansions):
        if gap(hi) > 0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"no bracket for the envelope fixed point at x={x!r}")
    return scipy.optimize.brentq(
        gap, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps
    )


def ode_oracle(
    p: ModelParams,
    t_end: float,
    n_steps: int,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> np.ndarray:
    """
    Integrate f'' = k/f from (f, f') = (y, w), independently of the implicit
    representation.

    The integrator is adaptive DOP853 (explicit 8th order Runge-Kutta) at
    rtol/atol, not the classical fixed-step RK4: steps are capped at
    t_end/n_steps and the solution is reported on the uniform grid of n_steps
    intervals.

    :return: array of shape (n_steps + 1, 3) holding rows (t, f, f')
    """
    require(t_end > 0 and math.isfinite(t_end), f"t_end must be positive, got {t_end}")
    require(n_steps >= 1000, f"n_steps must be at least 1000, got {n_steps}")
    grid = np.linspace(0.0, t_end, n_steps + 1)

    def rhs(_t, state):
        return [state[1], p.k / state[0]]

    def hits_zero(_t, state):
        return state[0]

    hits_zero.terminal = True  # type: ignore[attr-defined]

    sol = scipy.integrate.solve_ivp(
        rhs,
        (0.0, t_end),
        [p.y, p.w],
        method="DOP853",
        t_eval=grid,
        rtol=rtol,
        atol=atol,
        max_step=t_end / n_steps,
        events=hits_zero,
    )
    if sol.status == 1:
        raise NumericalError("ODE oracle step rejected: f reached 0")
    if not sol.success:
        raise ConvergenceError(f"ODE oracle failed: {sol.message}")
    logger.debug("ODE oracle done", k=p.k, t_end=t_end, evaluations=sol.nfev)
    return np.column_stack([sol.t, sol.y[0], sol.y[1]])
