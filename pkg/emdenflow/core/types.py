import enum
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pydantic


class _Frozen(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)


class QuadratureResult(_Frozen):
    value: float
    abs_error_estimate: float = pydantic.Field(ge=0)
    evaluations: int = pydantic.Field(ge=1)


class ModelParams(_Frozen):
    """Coefficient, initial value and initial slope of f'' = k/f."""

    k: float = pydantic.Field(gt=0, allow_inf_nan=False)
    y: float = pydantic.Field(1.0, gt=0, allow_inf_nan=False)
    w: float = pydantic.Field(0.0, ge=0, allow_inf_nan=False)

    @property
    def scaled_slope(self) -> float:
        """W = w/sqrt(2k)"""
        return self.w / math.sqrt(2.0 * self.k)

    @property
    def scaled_slope_sq(self) -> float:
        return self.w * self.w / (2.0 * self.k)


class TransformConstants(_Frozen):
    a: float = pydantic.Field(ge=0)
    b: float = pydantic.Field(gt=0)
    c: float = pydantic.Field(gt=0)


class ShootingResult(_Frozen):
    k: float = pydantic.Field(gt=0)
    w: float
    residual: float
    iterations: int = pydantic.Field(ge=0)

    @property
    def scaled_slope(self) -> float:
        return self.w / math.sqrt(2.0 * self.k)


class Regime(str, enum.Enum):
    above_critical = "above_critical"
    below_critical = "below_critical"


class CrossingPoints(_Frozen):
    k: float
    t1: float
    t0: float
    t2: float
    # exp(e^{2-k_c}/2k); None when the normalized pair is computed
    t2_lower_bound: Optional[float] = None

    @pydantic.model_validator(mode="after")
    def ordered(self):
        if not 1.0 < self.t1 <= self.t0 <= self.t2:
            raise ValueError(
                f"crossings must satisfy 1 < t1 <= t0 <= t2, got "
                f"({self.t1}, {self.t0}, {self.t2})"
            )
        return self


class CriticalReport(_Frozen):
    k: float = pydantic.Field(gt=0)
    w: float
    t0: float = pydantic.Field(gt=1)
    F_at_t0: float
    regime: Regime
    t1: Optional[float] = None
    t2: Optional[float] = None
    t2_lower_bound: Optional[float] = None
    lower_ratio_bound: float
    # no finite constant is established above the critical coefficient
    upper_ratio_bound: Optional[float] = None

    @pydantic.model_validator(mode="after")
    def crossings_match_regime(self):
        present = self.t1 is not None and self.t2 is not None
        if present != (self.regime == Regime.below_critical):
            raise ValueError("t1 and t2 are present exactly below the critical k")
        if present and not 1.0 < self.t1 < self.t2:  # type: ignore[operator]
            raise ValueError("crossings must satisfy 1 < t1 < t2")
        return self


class NormalizedExtrema(_Frozen):
    x_min: float
    min_ratio: float
    x_max_estimate: float
    max_ratio_estimate: float


class RatioBounds(_Frozen):
    k: float
    lower: float
    upper: float
    second_regime_lower: float


class RatioFactors(_Frozen):
    """f(t)/g(t) split as normalized ratio × shift × logarithmic factor."""

    t: float
    k: float
    normalized: float
    shift: float
    log: float
    product: float


class NormalizedUpperBound(_Frozen):
    alpha2: float
    inverse_g_x2: float
    bound: float
    constant: float
    sweep_max: float
    holds: bool


class BoundChain(_Frozen):
    normalized_factor: float
    shift_factor: float
    log_factor: float
    product: float
    slope_ratio_at_kc: float
    shift_floor: float
    second_regime_constant: float


class RecursionTrace(pydantic.BaseModel):
    """V_0..V_n of V_{j+1} - 2V_j + V_{j-1} = k/V_j with V_0 = 1, V_1 = 1 + k."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    k: float = pydantic.Field(gt=0)
    values: np.ndarray
    first_differences: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @pydantic.model_validator(mode="after")
    def consistent_lengths(self):
        if len(self.first_differences) != len(self.values) - 1:
            raise ValueError("first_differences must have one entry fewer than values")
        return self


class PropertyCheck(_Frozen):
    passed: bool
    first_violation: Optional[int] = None
    worst_margin: Optional[float] = None


class PropertyReport(_Frozen):
    k: float
    n: int
    checks: Dict[str, PropertyCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


class DiscreteCrossing(_Frozen):
    k: float
    n_max: int
    first_index: Optional[int]
    persistent: bool
    persistent_from: Optional[int]
    below_runs: List[Tuple[int, int]]
    c_hat: float
    n0_estimate: Optional[int]
    consistent_after_n0: Optional[bool]


class ConvergenceDiagnostic(_Frozen):
    k: float
    sample_indices: List[int]
    ratios: List[float]
    scaled_deviations: List[float]
    envelope_constant: float
    monotone: bool
    within_envelope: bool
    band_factor: float
    trend_ok: bool


class CheckResult(_Frozen):
    expected: Any = None
    actual: Any = None
    tolerance: Optional[float] = None
    passed: bool = pydantic.Field(serialization_alias="pass")
    detail: Optional[str] = None


class VerifyReport(pydantic.BaseModel):
    profile: str
    modules: Dict[str, Dict[str, CheckResult]] = {}

    @property
    def passed(self) -> bool:
        return all(
            c.passed for checks in self.modules.values() for c in checks.values()
        )

    @property
    def failed_checks(self) -> List[str]:
        return [
            f"{module}.{name}"
            for module, checks in self.modules.items()
            for name, check in checks.items()
            if not check.passed
        ]
