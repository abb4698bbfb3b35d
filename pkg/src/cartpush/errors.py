"""Exception types raised across the package."""


class CartPushError(Exception):
    """Base class for all package errors."""


class NonInvertibleModelError(CartPushError, ValueError):
    """The cart mass matrix is singular (or numerically so)."""


class EstimatorDegenerateError(CartPushError, ValueError):
    """An identified parameter vector cannot be mapped back to physical parameters."""


class NumericalDegeneracyError(CartPushError, ArithmeticError):
    """A filter innovation covariance could not be inverted."""


class InsufficientDataError(CartPushError, ValueError):
    """A trace is too short for the requested computation."""


class ConfigError(CartPushError, ValueError):
    """Malformed configuration. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg
