"""Shared exception base classes.

Concrete errors live next to the code that raises them; these bases exist so
callers (and the command line driver) can map whole failure families to exit
codes without importing every module.
"""


class StemmaplaceError(Exception):
    """Base class for all errors raised by this package."""


class DataError(StemmaplaceError, ValueError):
    """Invalid input data: malformed files, broken trees, bad witness ids."""


class ConfigError(StemmaplaceError, ValueError):
    """Invalid run configuration: unknown keys, unparsable values, bad paths."""


class NumericalError(StemmaplaceError, RuntimeError):
    """Numerical failure during optimization (non-finite loss and friends)."""
