import functools
from typing import Optional, Union

import pydantic
import pydantic_settings
from typing_extensions import Annotated


class EmdenflowSettings(pydantic_settings.BaseSettings):
    """
    Base class of the numerics settings groups.

    Each field accepts its own name as a keyword and an `EMDENFLOW_*` environment
    variable through `validation_alias=pydantic.AliasChoices(name, env_var)`; an
    explicit keyword wins over the environment:

        os.environ["EMDENFLOW_SOLVER_TOL"] = "1e-10"
        assert SolverSettings().tol == 1e-10
        assert SolverSettings(tol=1e-8).tol == 1e-8

    Unknown keywords are ignored so that a whole environment can be passed through.
    """

    model_config = pydantic.ConfigDict(extra="ignore")


class QuadratureSettings(EmdenflowSettings):
    tol: float = pydantic.Field(
        1e-12,
        gt=0,
        validation_alias=pydantic.AliasChoices("tol", "EMDENFLOW_QUAD_TOL"),
    )
    max_intervals: int = pydantic.Field(
        10_000,
        ge=1,
        validation_alias=pydantic.AliasChoices(
            "max_intervals", "EMDENFLOW_QUAD_MAX_INTERVALS"
        ),
    )
    # largest y² for which e^{y²} may be formed
    overflow_limit: float = pydantic.Field(
        700.0,
        gt=0,
        le=709.0,
        validation_alias=pydantic.AliasChoices(
            "overflow_limit", "EMDENFLOW_OVERFLOW_LIMIT"
        ),
    )
    # below this hi² - lo² the difference of Dawson terms cancels, integrate instead
    direct_window: float = pydantic.Field(
        0.5,
        gt=0,
        validation_alias=pydantic.AliasChoices(
            "direct_window", "EMDENFLOW_QUAD_DIRECT_WINDOW"
        ),
    )


class SolverSettings(EmdenflowSettings):
    tol: float = pydantic.Field(
        1e-12,
        gt=0,
        validation_alias=pydantic.AliasChoices("tol", "EMDENFLOW_SOLVER_TOL"),
    )
    max_iterations: int = pydantic.Field(
        200,
        ge=1,
        validation_alias=pydantic.AliasChoices(
            "max_iterations", "EMDENFLOW_SOLVER_MAX_ITERATIONS"
        ),
    )
    bracket_expansions: int = pydantic.Field(
        64,
        ge=1,
        validation_alias=pydantic.AliasChoices(
            "bracket_expansions", "EMDENFLOW_SOLVER_BRACKET_EXPANSIONS"
        ),
    )


class CriticalSettings(EmdenflowSettings):
    kc_low: float = pydantic.Field(
        0.5,
        gt=0,
        validation_alias=pydantic.AliasChoices("kc_low", "EMDENFLOW_KC_BRACKET_LOW"),
    )
    kc_high: float = pydantic.Field(
        2.0,
        gt=0,
        validation_alias=pydantic.AliasChoices(
            "kc_high", "EMDENFLOW_KC_BRACKET_HIGH"
        ),
    )
    kc_tol: float = pydantic.Field(
        1e-10,
        gt=0,
        validation_alias=pydantic.AliasChoices("kc_tol", "EMDENFLOW_KC_TOL"),
    )

    @pydantic.model_validator(mode="after")
    def ordered_bracket(self):
        if self.kc_low >= self.kc_high:
            raise ValueError("kc_low must be smaller than kc_high")
        return self


class DiscreteSettings(EmdenflowSettings):
    max_terms: int = pydantic.Field(
        10**8,
        ge=1,
        validation_alias=pydantic.AliasChoices("max_terms", "EMDENFLOW_MAX_TERMS"),
    )
    stream_threshold: int = pydantic.Field(
        10**6,
        ge=1,
        validation_alias=pydantic.AliasChoices(
            "stream_threshold", "EMDENFLOW_STREAM_THRESHOLD"
        ),
    )


class CacheSettings(EmdenflowSettings):
    cache_provider: Optional[str] = pydantic.Field(
        "native",
        validation_alias=pydantic.AliasChoices(
            "cache_provider", "EMDENFLOW_CACHE_PROVIDER"
        ),
    )


class NativeCacheSettings(CacheSettings):
    implementation: str = pydantic.Field(
        "LRU",
        validation_alias=pydantic.AliasChoices(
            "implementation", "EMDENFLOW_CACHE_IMPLEMENTATION"
        ),
    )
    maxsize: int = pydantic.Field(
        256,
        validation_alias=pydantic.AliasChoices("maxsize", "EMDENFLOW_CACHE_MAX_SIZE"),
    )


def cache_settings():
    s = CacheSettings()

    if s.cache_provider == "native":
        return NativeCacheSettings()
    return None


def _get_cache_provider(v) -> str:
    if v is None:
        return "none"
    elif isinstance(v, dict):
        return v.get("cache_provider", "none")
    return getattr(v, "cache_provider", "none")


class NumericsSettings(EmdenflowSettings):
    quadrature: QuadratureSettings = pydantic.Field(default_factory=QuadratureSettings)
    solver: SolverSettings = pydantic.Field(default_factory=SolverSettings)
    critical: CriticalSettings = pydantic.Field(default_factory=CriticalSettings)
    discrete: DiscreteSettings = pydantic.Field(default_factory=DiscreteSettings)
    cache: Annotated[
        Union[
            Annotated[NativeCacheSettings, pydantic.Tag("native")],
            Annotated[None, pydantic.Tag("none")],
        ],
        pydantic.Discriminator(_get_cache_provider),
    ] = pydantic.Field(default_factory=cache_settings)


@functools.lru_cache(maxsize=None)
def get_settings() -> NumericsSettings:
    return NumericsSettings()
