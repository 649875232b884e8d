"""Exception types shared across the package."""


class DisacError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DisacError):
    """Invalid grid, scenario or experiment configuration."""


class GeometryError(DisacError):
    """Degenerate geometry (coincident points, empty region, ...)."""


class DimensionError(DisacError):
    """Array dimensions do not match the resource grid or each other."""


class FeasibilityError(DisacError):
    """Requested waveform family exceeds the null-space budget."""


class RankError(DisacError):
    """Null space is numerically empty before the design finished."""


class UndefinedEntropyError(DisacError):
    """Entropy requested for an identically-zero image."""


class ConstraintViolationError(DisacError):
    """An allocation violates the half-duplex / budget constraints."""


class BudgetExceededError(DisacError):
    """Exhaustive enumeration would exceed the combinatorial budget."""
