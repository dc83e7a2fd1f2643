import math

import numpy as np
import pytest

from emdenflow.core.errors import DomainError
from emdenflow.discrete import (
    check_properties,
    convergence_diagnostic,
    crossing_detect,
    difference_constant,
    estimate_c_hat,
    iterate_recursion,
    log_identity_quotient,
    log_identity_quotients,
    recursion_trace,
    w_sequence,
)


def test_first_values():
    trace = recursion_trace(1.0, 3)
    np.testing.assert_allclose(trace.values, [1.0, 2.0, 3.5, 37.0 / 7.0])
    np.testing.assert_allclose(trace.first_differences, [1.0, 1.5, 1.5 + 1 / 3.5])
    assert trace.n == 3


def test_streaming_matches_trace():
    trace = recursion_trace(0.3, 50)
    streamed = [v for _, v, _ in iterate_recursion(0.3, 50)]
    np.testing.assert_array_equal(trace.values, streamed)


def test_size_guard(monkeypatch):
    monkeypatch.setenv("EMDENFLOW_MAX_TERMS", "100")
    with pytest.raises(DomainError, match="size guard"):
        recursion_trace(1.0, 101)


def test_w_sequence():
    assert w_sequence(1, 0.5) == 0.0
    assert w_sequence(100, 0.1) == pytest.approx(95.97052, abs=1e-4)
    with pytest.raises(DomainError):
        w_sequence(0, 1.0)
    with pytest.raises(DomainError):
        w_sequence(2.5, 1.0)


@pytest.mark.parametrize("k", [0.001, 0.1, 1.0, 5.0])
def test_properties_hold(k):
    report = check_properties(recursion_trace(k, 10_000))
    assert report.passed, report.checks
    # equality at j = 0 for the growth and difference bounds
    assert report.checks["lower_growth"].worst_margin == pytest.approx(0.0, abs=1e-15)


def test_difference_bound_tightness():
    trace = recursion_trace(1.0, 2)
    assert trace.first_differences[1] == 1.5
    assert 1.5 < 1.0 + math.log(2.0)


def test_property_violation():
    trace = recursion_trace(0.5, 20)
    trace.first_differences[5] *= 1.01
    report = check_properties(trace)
    assert not report.checks["telescoping"].passed
    assert report.checks["telescoping"].first_violation == 5


def test_log_identity():
    trace = recursion_trace(1.0, 5)
    assert log_identity_quotient(trace, 2) == pytest.approx(
        math.log(37.0 / 14.0) / (23.0 / 24.5), rel=1e-12
    )
    assert log_identity_quotient(trace, 2) == pytest.approx(1.03524, abs=1e-5)
    quotients = log_identity_quotients(trace)
    assert len(quotients) == trace.n - 1
    assert quotients[1] == pytest.approx(log_identity_quotient(trace, 2), rel=1e-15)
    with pytest.raises(DomainError):
        log_identity_quotient(trace, 1)
    with pytest.raises(DomainError):
        log_identity_quotient(trace, 5)


@pytest.mark.parametrize("k", [0.001, 0.01, 0.1])
def test_log_identity_accuracy(k):
    quotients = log_identity_quotients(recursion_trace(k, 10_000))
    # position m holds j = m + 1
    tail = quotients[9:]
    assert np.all(np.abs(tail - 1.0) < 0.005)
    assert abs(tail[-1] - 1.0) < abs(tail[0] - 1.0)


def test_difference_constant():
    assert difference_constant(1.0) == pytest.approx(1.0 - math.log(2.0))
    # the lattice quantity falls below the continuous k² - k ln(1 + k)
    trace = recursion_trace(1.0, 100)
    c_hat, n0 = estimate_c_hat(trace)
    assert 0 < c_hat < difference_constant(1.0)
    assert n0 is None or n0 >= 2


def test_growth_sandwich():
    k = 0.2
    trace = recursion_trace(k, 2_000)
    j = np.arange(trace.n + 1)
    upper = 1.0 + np.concatenate([[0.0], np.cumsum(k + np.log1p(j[:-1] * k))])
    assert np.all(1.0 + j * k <= trace.values * (1 + 1e-12))
    assert np.all(trace.values <= upper * (1 + 1e-12))


def test_crossing_detect_k1():
    result = crossing_detect(1.0, 10_000)
    assert result.first_index == 2
    # V/W dips below 1 around j = 10 before settling above it
    assert result.below_runs
    assert not result.persistent
    assert result.persistent_from is not None
    assert result.persistent_from == result.below_runs[-1][1] + 1
    assert result.consistent_after_n0 in (None, True)
    trace = recursion_trace(1.0, 10_000)
    for j in range(result.persistent_from, 10_001):
        assert trace.values[j] >= w_sequence(j, 1.0)


def test_crossing_detect_short_scan():
    # W_j overtakes V_j early for a tiny k and stays ahead over a short scan
    result = crossing_detect(1e-3, 50)
    assert result.first_index == 2
    assert not result.persistent
    assert result.persistent_from is None
    assert result.below_runs[-1][1] == 50
    assert result.n_max == 50


@pytest.mark.parametrize("k", [0.01, 0.001])
def test_crossing_detect_small_k_without_n0(k):
    # ψ(n) = Ĉ - 1 has no representable solution, which is a valid outcome
    result = crossing_detect(k, 1000)
    assert result.first_index == 2
    assert math.isfinite(result.c_hat)
    assert result.n0_estimate is None
    assert result.consistent_after_n0 is None

    c_hat, n0 = estimate_c_hat(recursion_trace(k, 1000))
    assert n0 is None
    assert math.isfinite(c_hat)


def test_crossing_detect_domain():
    with pytest.raises(DomainError):
        crossing_detect(1.0, 1)


def test_convergence_diagnostic():
    diag = convergence_diagnostic(1.0, [3, 4, 5])
    assert diag.sample_indices == [1000, 10_000, 100_000]
    assert all(r > 1 for r in diag.ratios)
    assert diag.ratios[0] == pytest.approx(1.02174, abs=1e-4)
    assert diag.ratios[-1] == pytest.approx(1.02712, abs=1e-4)
    # the deviation grows over these decades; reported, not required
    assert not diag.monotone
    assert diag.within_envelope
    assert diag.envelope_constant == pytest.approx(2 * abs(diag.scaled_deviations[0]))
    assert diag.band_factor <= 3.0


def test_convergence_diagnostic_validation():
    with pytest.raises(DomainError):
        convergence_diagnostic(1.0, [4, 3])
    with pytest.raises(DomainError):
        convergence_diagnostic(1.0, [9])
    with pytest.raises(DomainError):
        convergence_diagnostic(1.0, [])


@pytest.mark.slow
def test_convergence_long_run():
    diag = convergence_diagnostic(1.0, [3, 4, 5, 6, 7, 8])
    assert diag.within_envelope
    assert abs(diag.ratios[-1] - 1.0) < abs(diag.ratios[0] - 1.0)
