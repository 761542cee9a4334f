"""Exception hierarchy shared by the services and the command line.

Every error a caller can trigger maps to one exit code of the CLI through
the handlers registered in ``cli.py``.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL_CAPACITY = 2
EXIT_CHECK_FAILED = 3


class RankedServersError(Exception):
    """Base class for all errors raised by this package."""

    title = "Error"
    exit_code = EXIT_USAGE

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        payload = {"error": self.title, "message": self.message}
        payload.update(self.details)
        return payload


class ParameterError(RankedServersError, ValueError):
    """An argument is outside its documented range (lambda <= 0, m < 0, ...)."""

    title = "Invalid Parameter"


class DomainError(ParameterError):
    """An estimate was requested outside the region it is certified for."""

    title = "Outside Domain"

    def __init__(self, message, boundary=None, **details):
        if boundary is not None:
            details["boundary"] = boundary
        super().__init__(message, **details)
        self.boundary = boundary


class PreconditionError(ParameterError):
    """The result would not be certified (e.g. too few quadrature nodes)."""

    title = "Precondition Failed"


class TableIndexError(ParameterError, IndexError):
    """Index outside 0..l_max of a survival table."""

    title = "Index Out Of Range"


class NumericalCapacityError(RankedServersError, ArithmeticError):
    """Requested tolerance is below what double precision can certify."""

    title = "Numerical Capacity Exceeded"
    exit_code = EXIT_NUMERICAL_CAPACITY

    def __init__(self, message, achievable, **details):
        super().__init__(message, achievable=achievable, **details)
        self.achievable = achievable


class SimulationStateError(RankedServersError, RuntimeError):
    """A debug-mode consistency check on the simulator state failed."""

    title = "Inconsistent Simulation State"
