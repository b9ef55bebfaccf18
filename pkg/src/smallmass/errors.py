"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, model description, or CLI input."""


class NumericalError(RuntimeError):
    """A simulation produced non-finite state or an otherwise unusable result."""
