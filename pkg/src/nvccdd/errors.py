class InvalidParameterError(ValueError):
    """Raised when an input violates an operation's preconditions."""


class NumericalError(RuntimeError):
    """Raised when a computation produces non-finite or otherwise unusable output."""
