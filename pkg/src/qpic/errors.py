"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A solver or fit failed to produce a usable result (CLI exit code 3)."""
