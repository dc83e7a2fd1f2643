import pickle

import pydantic
import pytest

from emdenflow import continuous, critical, discrete, quadrature, shooting
from emdenflow.core.errors import (
    BracketError,
    ConfigValidationError,
    ConvergenceError,
    DomainError,
    EmdenflowError,
    NumericalError,
    OverflowGuardError,
    VerificationFailed,
)
from emdenflow.core.types import ModelParams


@pytest.mark.parametrize(
    "exc",
    [
        BracketError("critical coefficient", 1.5, 2.0, -0.1, -0.3),
        OverflowGuardError(900.0, 700.0),
        VerificationFailed(["critical.k_c", "shooting.w_at_kc"]),
        ConvergenceError("did not converge"),
        DomainError("k must be positive"),
    ],
)
def test_errors_pickle(exc):
    restored = pickle.loads(pickle.dumps(exc))
    assert type(restored) is type(exc)
    assert str(restored) == str(exc)


def test_hierarchy():
    assert issubclass(DomainError, ValueError)
    assert issubclass(OverflowGuardError, OverflowError)
    for cls in (BracketError, OverflowGuardError, ConvergenceError):
        assert issubclass(cls, NumericalError)
    assert issubclass(NumericalError, EmdenflowError)
    assert not issubclass(NumericalError, DomainError)


def test_verification_failed_lists_checks():
    exc = VerificationFailed(["critical.k_c"])
    assert exc.failed_checks == ["critical.k_c"]
    assert "critical.k_c" in str(exc)


def test_config_validation_error_truncates():
    class Many(pydantic.BaseModel):
        values: list

    class Wide(pydantic.BaseModel):
        a: int
        b: int
        c: int
        d: int
        e: int
        f: int
        g: int
        h: int

    with pytest.raises(pydantic.ValidationError) as excinfo:
        Wide()
    err = ConfigValidationError("eval", pydantic_exc=excinfo.value)
    assert "`eval`" in str(err)
    assert "truncated to 20 lines" in str(err)

    with pytest.raises(pydantic.ValidationError) as excinfo:
        Many(values=1)
    err = ConfigValidationError("eval", pydantic_exc=excinfo.value)
    assert "truncated" not in str(err)


@pytest.mark.parametrize(
    "call",
    [
        lambda: quadrature.exp_sq_integral(-1.0),
        lambda: quadrature.exp_sq_integral_between(2.0, 1.0),
        lambda: quadrature.log_exp_sq_integral(0.0),
        lambda: continuous.g_eval(0.5, 1.0),
        lambda: continuous.g_eval(2.0, 0.0),
        lambda: continuous.asymptotic_f(2.0, 1.0),
        lambda: continuous.f_eval(-1.0, ModelParams(k=1.0)),
        lambda: shooting.solve_w(0.0),
        lambda: shooting.solve_w(float("nan")),
        lambda: discrete.recursion_trace(-1.0, 10),
        lambda: discrete.recursion_trace(1.0, 0),
        lambda: critical.solve_kc(bracket=(2.0, 1.0)),
        lambda: critical.crossings(2.0),
    ],
)
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_model_params_validation():
    with pytest.raises(pydantic.ValidationError):
        ModelParams(k=-1.0)
    with pytest.raises(pydantic.ValidationError):
        ModelParams(k=1.0, w=-0.1)
    with pytest.raises(pydantic.ValidationError):
        ModelParams(k=1.0, y=0.0)


def test_overflow_guard():
    with pytest.raises(OverflowGuardError):
        quadrature.exp_sq_integral(30.0)
    # the logarithmic form has no such limit
    assert quadrature.log_exp_sq_integral(30.0) > 895


def test_bracket_error_for_wrong_kc_bracket():
    with pytest.raises(BracketError) as excinfo:
        critical.solve_kc(bracket=(1.5, 2.0))
    assert excinfo.value.lo == 1.5
    assert excinfo.value.f_lo < 0
