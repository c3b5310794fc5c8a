"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage problems exit 1, data and file
format problems exit 2, numerical failures exit 3.
"""


class LogDetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(LogDetError, ValueError):
    """Input array is malformed (wrong rank, empty, non-finite entries)."""


class ShapeError(InvalidInputError):
    """Arrays that must agree in shape do not."""


class ParameterError(LogDetError, ValueError):
    """A numeric parameter lies outside its valid range."""


class PSDViolationError(LogDetError, ValueError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class NumericalFailureError(LogDetError, ArithmeticError):
    """An iterative routine did not converge."""


class FormatError(LogDetError):
    """A dataset file does not match its binary format."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class TrainingError(LogDetError, ArithmeticError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, batch=None, epoch=None):
        self.batch = batch
        self.epoch = epoch
        super().__init__(message)
