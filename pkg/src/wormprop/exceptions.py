"""Exception types raised across the package."""


class WormpropError(Exception):
    """Base class for all package-specific errors."""


class InvalidLabelError(WormpropError, ValueError):
    """A node label is outside [0, worm_count]."""


class MalformedStatusError(WormpropError, ValueError):
    """A status matrix violates the one-hot-or-zero column invariant."""


class DimensionError(WormpropError, ValueError):
    """Shapes of two related objects do not match."""


class PreconditionError(WormpropError, ValueError):
    """An operation was called on inputs that violate its precondition."""


class GraphFormatError(WormpropError, ValueError):
    """A graph / state / pool file is malformed or has an unknown version."""


class SizeCapError(WormpropError, ValueError):
    """An enumeration would exceed its configured size cap."""


class StructureError(WormpropError, ValueError):
    """A network cannot be built for the requested structure (e.g. worm count
    not a power of two)."""


class ConfigurationError(WormpropError, ValueError):
    """A construction-time consistency check failed (e.g. the dominance
    constant does not dominate the largest incoming weight sum)."""


class NumericError(WormpropError, ArithmeticError):
    """A non-finite value appeared during network execution."""


class ModeError(WormpropError, ValueError):
    """An operation received a trace produced in an incompatible mode."""
