"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: bad input data or configuration is
exit code 1, numerical or precondition failures during computation are
exit code 2.
"""


class CalbenchError(Exception):
    """Base class for all package errors."""


class DataFormatError(CalbenchError):
    """Malformed or invalid input data (files, parameters)."""


class PreconditionError(CalbenchError):
    """A computation's stated precondition does not hold."""


class NumericalError(CalbenchError):
    """A numerical procedure failed to converge or produced garbage."""
