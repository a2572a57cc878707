"""Exception types shared across the package.

The CLI maps these onto exit codes: usage and domain problems exit with 2,
resource limits with 4.
"""


class RankOneError(Exception):
    """Base class for all errors raised by :mod:`rankone`."""


class UsageError(RankOneError, ValueError):
    """Malformed input: wrong dimension, out-of-range argument, bad file."""


class DomainError(RankOneError, ValueError):
    """Arguments are well formed but outside the mathematical domain of the call."""


class ResourceError(RankOneError, RuntimeError):
    """The request is valid but exceeds a documented size or dimension cap."""


class NumericError(RankOneError, ArithmeticError):
    """Floating-point range problems (overflow of a normalisation, etc.)."""
