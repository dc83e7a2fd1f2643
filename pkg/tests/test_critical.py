import math

import numpy as np
import pytest

from emdenflow import critical
from emdenflow.continuous import f_eval, g_eval
from emdenflow.core.errors import DomainError
from emdenflow.core.types import ModelParams, Regime
from emdenflow.shooting import solve_w


@pytest.fixture
def kc():
    return critical.solve_kc()


def _params(k):
    return ModelParams(k=k, y=1.0, w=solve_w(k).w)


def test_critical_constants(kc):
    assert kc == pytest.approx(1.0384, abs=2e-4)
    wc = solve_w(kc).w
    assert wc == pytest.approx(0.6218, abs=2e-4)
    t0 = critical.solve_t0(kc, wc)
    assert t0 == pytest.approx(18.3798, rel=1e-3)
    # the gap closes exactly at t0(k_c)
    assert critical.normalized_gap_log(math.log(t0), kc, wc) == pytest.approx(
        0.0, abs=1e-8
    )


def test_objective_signs(kc):
    assert critical.kc_objective(0.5) > 0
    assert critical.kc_objective(2.0) < 0
    for k in np.linspace(0.1, 3.0, 8):
        assert (critical.kc_objective(float(k)) > 0) == (k < kc)


def test_psi():
    ts = np.geomspace(1.01, 1e8, 30)
    values = [critical.psi(float(t), 0.7) for t in ts]
    assert all(a > b for a, b in zip(values, values[1:]))
    for level in (-5.0, 0.0, 0.3, 10.0):
        u = critical.solve_psi_log(0.7, level)
        assert critical.psi_log(u, 0.7) == pytest.approx(level, abs=1e-12)
    with pytest.raises(DomainError):
        critical.psi_log(0.0, 0.7)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("t", [3.0, 20.0, 150.0])
def test_gap_forms_agree(k, t):
    w = solve_w(k).w
    assert critical.F_of(t, k, w) == pytest.approx(
        critical.F_of_explicit(t, k, w), rel=1e-8, abs=1e-9
    )


@pytest.mark.parametrize("k", [0.1, 0.5, 2.0])
def test_gap_sign_matches_f_below_g(k):
    p = _params(k)
    for t in np.geomspace(1.5, 1e4, 15):
        t = float(t)
        gap = critical.F_of(t, k, p.w)
        below = f_eval(t, p) < g_eval(t, k)
        if abs(f_eval(t, p) / g_eval(t, k) - 1) > 1e-9:
            assert (gap > 0) == below


def test_gap_below_one():
    # g(t) < 1 close to t = 1 while f ≥ 1
    k = 0.3
    assert critical.F_of(1.0, k, solve_w(k).w) < 0
    assert critical.normalized_gap_log(1e-3, k, solve_w(k).w) == -1.0


@pytest.mark.parametrize("k", [0.3, 1.0, 2.5])
def test_gap_peaks_at_t0(k):
    w = solve_w(k).w
    t0 = critical.solve_t0(k, w)
    assert critical.gap_slope(t0 * 0.7, k, w) > 0
    assert critical.gap_slope(t0 * 1.3, k, w) < 0
    assert critical.gap_slope(t0, k, w) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("k", [0.05, 0.5, 1.0])
def test_crossings(k, kc):
    points = critical.crossings(k)
    p = _params(k)
    assert 1 < points.t1 < points.t0 < points.t2
    for t in (points.t1, points.t2):
        assert f_eval(t, p) == pytest.approx(g_eval(t, k), rel=1e-8)
    assert points.t2 >= points.t2_lower_bound
    assert points.t2_lower_bound == pytest.approx(
        math.exp(math.exp(2.0 - kc) / (2.0 * k))
    )


def test_crossings_above_critical():
    with pytest.raises(DomainError, match="f stays above g"):
        critical.crossings(1.5)


def test_normalized_crossings():
    points = critical.normalized_crossings()
    assert points.k == 1.0
    assert points.t1 == pytest.approx(2.4556, abs=2e-4)
    assert points.t2 == pytest.approx(263.03, rel=1e-4)
    assert points.t2_lower_bound is None


def test_normalized_extrema():
    x_min, min_ratio = critical.normalized_minimum()
    assert x_min == pytest.approx(5.7889, abs=2e-3)
    assert min_ratio == pytest.approx(0.8829, abs=1e-4)
    extrema = critical.ratio_extrema_normalized()
    assert extrema.max_ratio_estimate == pytest.approx(1.0223, abs=2e-4)
    assert 2e5 <= extrema.x_max_estimate <= 6e5


def test_normalized_upper_bound():
    bound = critical.normalized_ratio_upper_bound()
    assert bound.alpha2 == pytest.approx(1.1115, abs=1e-4)
    assert bound.inverse_g_x2 == pytest.approx(0.00114, abs=1e-5)
    assert bound.holds
    assert bound.sweep_max <= bound.bound <= 1.12


def test_bound_chain():
    chain = critical.bound_chain()
    assert chain.shift_factor == pytest.approx(1.0326, abs=1e-4)
    assert chain.log_factor == pytest.approx(1.0400, abs=1e-4)
    assert chain.product == pytest.approx(1.2023, abs=1e-3)
    assert chain.product < critical.UPPER_RATIO_BOUND
    assert chain.slope_ratio_at_kc == pytest.approx(0.5988, abs=2e-4)
    assert chain.shift_floor == pytest.approx(3.5909, abs=2e-3)
    assert chain.second_regime_constant == pytest.approx(0.5055, abs=1e-3)


def test_thresholds():
    assert critical.small_k_threshold() == pytest.approx(0.0509059, abs=5e-6)
    assert critical.large_k_threshold() == pytest.approx(3.18097, abs=1e-4)


@pytest.mark.parametrize("k", [0.02, 0.3, 0.9])
def test_ratio_bounds_hold(k):
    bounds = critical.ratio_bounds(k)
    points = critical.crossings(k)
    p = _params(k)
    assert bounds.lower < 1 < bounds.upper
    for t in np.geomspace(points.t1, min(points.t2, 1e12), 25):
        ratio = f_eval(float(t), p) / g_eval(float(t), k)
        assert bounds.lower <= ratio <= bounds.upper


@pytest.mark.parametrize("k", [0.3, 0.5, 0.9])
def test_ratio_upper_bound_past_t2(k):
    bounds = critical.ratio_bounds(k)
    points = critical.crossings(k)
    p = _params(k)
    ratios = [
        f_eval(float(t), p) / g_eval(float(t), k)
        for t in np.geomspace(points.t2, 10.0 * points.t2, 40)
    ]
    # f is back above g after t2, and stays under the constant
    assert min(ratios) >= 1.0 - 1e-9
    assert max(ratios) > 1.0
    assert max(ratios) <= bounds.upper == critical.UPPER_RATIO_BOUND


def test_ratio_bounds_constant():
    # ½ (ln √(2/k))^{-1/2} at k = 0.02
    assert critical.ratio_bounds(0.02).lower == pytest.approx(0.3295051, abs=1e-6)
    with pytest.raises(DomainError):
        critical.ratio_bounds(1.5)


@pytest.mark.parametrize("k, t", [(0.5, 10.0), (0.1, 1e3), (1.0, 2.0)])
def test_ratio_factors(k, t):
    factors = critical.ratio_factors(t, k)
    p = _params(k)
    assert factors.product == pytest.approx(f_eval(t, p) / g_eval(t, k), rel=1e-9)
    assert factors.normalized == pytest.approx(
        factors.product / (factors.shift * factors.log)
    )


def test_critical_report_below():
    report = critical.critical_report(0.5)
    assert report.regime == Regime.below_critical
    assert report.F_at_t0 > 0
    assert report.t1 < report.t0 < report.t2
    assert report.upper_ratio_bound == 1.21
    assert report.lower_ratio_bound == critical.ratio_bounds(0.5).lower
    assert report.t2 >= report.t2_lower_bound


def test_critical_report_above():
    k = 2.0
    report = critical.critical_report(k)
    assert report.regime == Regime.above_critical
    assert report.F_at_t0 < 0
    assert report.t1 is None and report.t2 is None
    assert report.upper_ratio_bound is None
    p = _params(k)
    for t in np.geomspace(1.01, 1e8, 40):
        assert f_eval(float(t), p) >= g_eval(float(t), k)
