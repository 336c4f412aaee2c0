"""Exception types raised by the interpolation library and harness."""


class InterpolationError(Exception):
    """Base class for every error raised by :mod:`manifold_interp`."""


class NonFiniteInput(InterpolationError, ValueError):
    """An input contained NaN or infinity."""


class InsufficientHistory(InterpolationError):
    """Not enough known samples around a gap to build the reference window."""


class ExtrapolationUnsupported(InterpolationError):
    """A query lies outside the knot range of a method that only interpolates."""


class SingularSystem(InterpolationError):
    """A linear system could not be solved (singular or not positive definite)."""


class ParseError(InterpolationError, ValueError):
    """A CSV or config file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InterpolationError, ValueError):
    """Parsed data violates a structural invariant."""
