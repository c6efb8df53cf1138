"""Exception taxonomy shared across the package.

Library code raises these; the CLI maps them to exit codes (config/validation
problems exit 2, numerical failures exit 3).
"""


class StiffLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StiffLabError, ValueError):
    """Invalid configuration file or scenario description."""


class ArgumentError(StiffLabError, ValueError):
    """Invalid argument to a library operation."""


class DomainError(StiffLabError, ValueError):
    """Geometric inconsistency, e.g. a barrier wider than the box."""


class ShapeError(StiffLabError, ValueError):
    """Operation requires a grid/form shape it did not get."""


class AssemblyError(StiffLabError, RuntimeError):
    """Discrete form cannot be assembled (e.g. zero resistance cell)."""


class NumericalError(StiffLabError, RuntimeError):
    """Solver breakdown or failed accuracy check."""


class InvariantViolation(StiffLabError, RuntimeError):
    """A structural invariant that should hold by construction failed."""


class ResourceError(StiffLabError, RuntimeError):
    """Requested computation exceeds the configured resource guard."""
