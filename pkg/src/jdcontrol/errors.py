"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class NumericalError(RuntimeError):
    """A sweep produced a non-finite state (overflow / blow-up)."""
