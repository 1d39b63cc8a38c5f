from typing import Dict, Type


class EngineError(ValueError):
    """Base class for every failure the engine reports to callers"""


class UnsupportedOrderError(EngineError):
    pass


class RegularityError(EngineError):
    pass


class DegenerateSystemError(EngineError):
    pass


class UnsupportedConfigurationError(EngineError):
    pass


class DomainError(EngineError):
    pass


class ConvergenceError(EngineError):
    """Quadrature, ODE or fixed-point iteration did not converge"""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class SpectralGapError(ConvergenceError):
    pass


class VerificationError(EngineError):
    pass


# CLI exit codes: 0 success, 2 usage, 3 domain/regularity, 4 verification
EXIT_CODES: Dict[Type[EngineError], int] = {
    VerificationError: 4,
    EngineError: 3,
}


def exit_code_for(error: Exception) -> int:
    for error_type, code in EXIT_CODES.items():
        if isinstance(error, error_type):
            return code
    return 1
