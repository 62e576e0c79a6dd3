"""Exception types raised across the package."""


class PriceOfUncertaintyError(Exception):
    """Base class for all package errors."""


class SingularMatrix(PriceOfUncertaintyError, ArithmeticError):
    pass


class InfeasibleProblem(PriceOfUncertaintyError):
    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class DomainError(PriceOfUncertaintyError, ValueError):
    pass


class UnsupportedDistribution(PriceOfUncertaintyError, ValueError):
    pass


class UnsupportedTopology(PriceOfUncertaintyError, ValueError):
    pass


class InfeasibleTightening(PriceOfUncertaintyError):
    pass


class DegeneratePolicy(PriceOfUncertaintyError):
    pass


class StageError(PriceOfUncertaintyError):
    """Wraps a failure inside a scenario pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
