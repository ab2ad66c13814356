from __future__ import annotations


class RelayCsiError(Exception):
    pass


class InvalidInput(RelayCsiError, ValueError):
    pass


class InvalidRatio(InvalidInput):
    pass


class TooFewLevels(InvalidInput):
    pass


class DegenerateKappa(InvalidInput):
    pass


class MissingQuantizer(InvalidInput):
    pass


class BudgetTooSmall(InvalidInput):
    pass


class InfiniteQuantile(InvalidInput):
    pass


class SpecValidation(InvalidInput):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class NumericalError(RelayCsiError, ArithmeticError):
    pass


class DesignInfeasible(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class QuadratureFailure(NumericalError):
    pass
