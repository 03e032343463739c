"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration values (bad grid, out-of-range parameters, malformed config)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular solve, eigensolver failure)."""

    def __init__(self, message, *, step=None, singular_values=None):
        super().__init__(message)
        self.step = step
        self.singular_values = singular_values


class UndefinedCapacityError(ValueError):
    """The target has zero mean square, so capacity is undefined."""
