"""Simulation and analysis of a quantum-dot source filtered by a tunable add-drop ring."""

from importlib.metadata import PackageNotFoundError, version

from .errors import ConfigError, NumericalError

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = ["ConfigError", "NumericalError", "__version__"]
