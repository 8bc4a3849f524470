"""Unit conversions and the two pre-filter masking corrections.

Backscatter arrives in dB; speckle filtering and terrain flattening work
in linear power, so the pipeline round-trips through :func:`to_linear`
and :func:`to_db`.  Border-noise and extreme-value masking never alter a
surviving value: kept pixels pass through bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grid import RasterGrid, Units, require_same_geometry, require_units

DEFAULT_ANGLE_RANGE = (31.0, 46.0)
DEFAULT_DB_RANGE = (-30.0, 15.0)


@dataclass(frozen=True)
class AngleRange:
    """Acceptable ellipsoid incidence angles; pixels outside are border noise."""

    min_deg: float = DEFAULT_ANGLE_RANGE[0]
    max_deg: float = DEFAULT_ANGLE_RANGE[1]

    def __post_init__(self):
        if not (0 < self.min_deg < self.max_deg < 90):
            raise ParameterError(
                f"angle range must satisfy 0 < min < max < 90, got "
                f"[{self.min_deg}, {self.max_deg}]"
            )


@dataclass(frozen=True)
class DbRange:
    """Acceptable backscatter band in dB; pixels outside are sensor artifacts."""

    min_db: float = DEFAULT_DB_RANGE[0]
    max_db: float = DEFAULT_DB_RANGE[1]

    def __post_init__(self):
        if not self.min_db < self.max_db:
            raise ParameterError(
                f"db range must satisfy min < max, got [{self.min_db}, {self.max_db}]"
            )


def to_db(grid: RasterGrid) -> RasterGrid:
    """10*log10(x).  Non-positive values have no dB representation and
    become invalid."""
    require_units(grid, Units.LINEAR)
    positive = grid.values > 0
    out_valid = grid.valid & positive
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(positive, 10.0 * np.log10(np.where(positive, grid.values, 1.0)), 0.0)
    return grid.with_values(np.where(out_valid, out, 0.0), valid=out_valid, units=Units.DB)


def to_linear(grid: RasterGrid) -> RasterGrid:
    """10^(x/10); inverse of :func:`to_db`."""
    require_units(grid, Units.DB)
    out = np.power(10.0, grid.values / 10.0)
    out = np.where(grid.valid, out, 0.0)
    return grid.with_values(out, units=Units.LINEAR)


def mask_border_angle(grid: RasterGrid, angle: RasterGrid, rng: AngleRange | None = None) -> RasterGrid:
    """Invalidate pixels whose incidence angle falls outside the range.

    The angle band must be co-registered with the grid; pixels with an
    invalid angle are masked too.
    """
    rng = rng or AngleRange()
    require_units(angle, Units.DEGREES)
    require_same_geometry(grid, angle, "scene and angle band")
    keep = angle.valid & (angle.values >= rng.min_deg) & (angle.values <= rng.max_deg)
    out_valid = grid.valid & keep
    return grid.with_values(grid.values.copy(), valid=out_valid)


def mask_extremes(grid: RasterGrid, rng: DbRange | None = None) -> RasterGrid:
    """Invalidate backscatter outside [min_db, max_db] (white spots,
    missing-pixel artifacts)."""
    rng = rng or DbRange()
    require_units(grid, Units.DB)
    keep = (grid.values >= rng.min_db) & (grid.values <= rng.max_db)
    out_valid = grid.valid & keep
    return grid.with_values(grid.values.copy(), valid=out_valid)
