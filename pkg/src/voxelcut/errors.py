"""Exception hierarchy shared by all voxelcut modules.

Each class maps to a distinct CLI exit code (see ``voxelcut.cli``), so
callers can tell apart malformed files, bad payloads, invalid probability
fields and structural mismatches without parsing messages.
"""


class VoxelCutError(Exception):
    """Base class for all voxelcut errors."""


class ShapeMismatchError(VoxelCutError):
    """Volumes, channels or grids whose shapes/spacings do not line up."""


class InvalidProbabilityError(VoxelCutError):
    """A probability volume violates its invariants where a valid one is required."""


class EmptySurfaceError(VoxelCutError):
    """Surface distance is undefined because at least one surface is empty."""


class HeaderError(VoxelCutError):
    """Volume header is missing, malformed or describes an unsupported layout."""


class DataError(VoxelCutError):
    """Volume payload is truncated, oversized or holds illegal values."""


class CapacityError(VoxelCutError):
    """Graph capacities exceed the solver's integer arithmetic headroom."""
