from typing import Iterable, Optional

import pydantic

PYDANTIC_ERROR_TRUNCATION = 20


class EmdenflowError(Exception):
    pass


class DomainError(EmdenflowError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(EmdenflowError):
    """A computation could not produce a value to the requested accuracy."""


class ConvergenceError(NumericalError):
    pass


class BracketError(NumericalError):
    def __init__(self, what: str, lo: float, hi: float, f_lo: float, f_hi: float):
        self.what, self.lo, self.hi, self.f_lo, self.f_hi = what, lo, hi, f_lo, f_hi
        super().__init__(
            f"{what}: no sign change on [{lo!r}, {hi!r}] "
            f"(values {f_lo!r} and {f_hi!r})"
        )

    def __reduce__(self):
        return self.__class__, (self.what, self.lo, self.hi, self.f_lo, self.f_hi)


class OverflowGuardError(NumericalError, OverflowError):
    def __init__(self, exponent: float, limit: float):
        self.exponent = exponent
        self.limit = limit
        super().__init__(
            f"exp({exponent!r}) is beyond the overflow guard exp({limit!r})"
        )

    def __reduce__(self):
        return self.__class__, (self.exponent, self.limit)


class ConfigValidationError(EmdenflowError):
    def __init__(
        self,
        command: str,
        pydantic_exc: Optional[pydantic.ValidationError] = None,
        error_str: str = "Invalid configuration for command",
    ):
        pydantic_exc_output = ""
        if pydantic_exc:
            exc_lines = str(pydantic_exc).split("\n")
            if len(exc_lines) > PYDANTIC_ERROR_TRUNCATION:
                pydantic_exc_output += "Pydantic error message "
                pydantic_exc_output += (
                    f"(truncated to {PYDANTIC_ERROR_TRUNCATION} lines):\n"
                )
                pydantic_exc_output += "\n".join(exc_lines[:PYDANTIC_ERROR_TRUNCATION])
                pydantic_exc_output += (
                    f"\n({len(exc_lines)-PYDANTIC_ERROR_TRUNCATION} lines truncated)"
                )
            else:
                pydantic_exc_output += "Pydantic error message:\n"
                pydantic_exc_output += str(pydantic_exc)

        super().__init__(f"{error_str} `{command}`.\n" + pydantic_exc_output)


class VerificationFailed(EmdenflowError):
    def __init__(self, failed_checks: Iterable[str]):
        self.failed_checks = list(failed_checks)
        super().__init__(
            f"{len(self.failed_checks)} check(s) failed: "
            + ", ".join(self.failed_checks)
        )

    def __reduce__(self):
        return self.__class__, (self.failed_checks,)


def require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)
