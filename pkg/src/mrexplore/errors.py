"""Exception types shared across the package."""


class MrexploreError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MrexploreError):
    """Rejected configuration: bad dimensions, unknown keys, out-of-range values."""


class InvalidPoseError(MrexploreError):
    """A pose lies outside the map or on a non-traversable cell."""


class GridMismatchError(MrexploreError):
    """Two grids disagree on shape or resolution where they must match."""


class ContractViolationError(MrexploreError):
    """A runtime precondition was violated (e.g. acting on a stale candidate)."""


class WeightsFormatError(MrexploreError):
    """A policy weights file is malformed, truncated, or carries trailing bytes."""
