from typing import Optional


class DRAuditError(Exception):
    """Base class for every error raised by the auditing library."""


class InvalidArgumentError(DRAuditError, ValueError):
    """An argument violates an operation's precondition."""


class NumericFailureError(DRAuditError, ArithmeticError):
    """A numerical routine did not reach its tolerance."""

    def __init__(self, message: str, achieved_tolerance: Optional[float] = None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class PlanInvariantError(NumericFailureError):
    """A transport plan failed its post-hoc marginal or cost check."""


class CapacityError(DRAuditError, RuntimeError):
    """Problem size exceeds what a dense solver is allowed to handle."""

    def __init__(self, message: str, size: int, limit: int, index: Optional[int] = None):
        super().__init__(message)
        self.size = size
        self.limit = limit
        self.index = index


class RankDeficiencyError(InvalidArgumentError):
    """Data spans fewer directions than requested."""

    def __init__(self, message: str, achieved_rank: int):
        super().__init__(message)
        self.achieved_rank = achieved_rank
