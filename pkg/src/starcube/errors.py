"""Exception hierarchy shared by all modules.

Exit codes follow the CLI contract: 2 for configuration problems,
3 for data problems, 4 for degenerate algorithmic conditions.
"""


class StarError(Exception):
    exit_code = 1


class ConfigError(StarError):
    """Bad configuration: unknown keys, invalid step order, bad values."""

    exit_code = 2


class ParameterError(ConfigError):
    """An operation was called with an out-of-range parameter."""


class UnitsError(ConfigError):
    """An operation received a grid in the wrong units."""


class DataError(StarError):
    """Problems with the data itself (files, shapes, projections)."""

    exit_code = 3


class AlignmentError(DataError):
    """Grids that must be co-registered are not."""


class ProjectionError(DataError):
    """Source and target CRS differ; reprojection is out of scope."""


class IngestError(DataError):
    """Scene files do not match their declared metadata."""


class NotFoundError(DataError):
    """A requested cube entity (scene, run) does not exist."""


class DegenerateError(StarError):
    """An algorithm hit a degenerate condition on otherwise valid data."""

    exit_code = 4


class DegenerateHistogramError(DegenerateError):
    """All histogram mass in a single bin; no threshold exists."""


class NoBimodalRegionError(DegenerateError):
    """No chessboard cell passed the bimodality selection."""
