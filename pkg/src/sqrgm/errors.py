"""Exception hierarchy shared across the package.

Each class carries an ``exit_code`` used by the command-line front end:
3 for problems with the input data, 4 for numeric/validity problems.
"""


class SqrError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class InvalidParamsError(SqrError, ValueError):
    """Natural parameters outside the set where the log partition is finite."""


class NonConvergenceError(SqrError, ArithmeticError):
    """A sum or integral failed to converge within its budget."""


class EmptySliceError(SqrError, ValueError):
    """Slice level lies above the maximum of the log density."""


class NotNegativeDefiniteError(SqrError, ValueError):
    pass


class NoValidStartError(SqrError, ValueError):
    pass


class DomainViolationError(SqrError, ValueError):
    """Observation outside the support of the base family."""

    exit_code = 3


class DegenerateColumnError(SqrError, ValueError):
    """Column whose univariate MLE is undefined (zero mean or variance)."""

    exit_code = 3


class ParseError(SqrError, ValueError):
    exit_code = 3


class FormatError(ParseError):
    """Malformed model file."""
