"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class WeylPersistError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigInvalid(WeylPersistError, ValueError):
    exit_code = 2


class InsufficientData(WeylPersistError, ValueError):
    exit_code = 3


class GridTooLarge(WeylPersistError, ValueError):
    exit_code = 4


class FactorizationFailed(WeylPersistError, ArithmeticError):
    exit_code = 5


class PrecisionLoss(WeylPersistError, ArithmeticError):
    """Raised when an alternating sum cannot be certified.

    ``lower`` and ``upper`` hold an analytic enclosure of the requested value
    (possibly infinite when no enclosure applies).
    """

    exit_code = 6

    def __init__(self, message, lower=float("-inf"), upper=float("inf")):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class OddDegreeWholeLine(WeylPersistError, ValueError):
    exit_code = 7


class BoundsFailed(WeylPersistError):
    exit_code = 8


class PreconditionError(WeylPersistError, ValueError):
    exit_code = 9
