"""Radiometric terrain flattening and steep-slope masking.

The geometric part of terrain correction (orthorectification) is assumed
done upstream; this module only models how local slopes modulate the
radiometry.  Slope and aspect come from a Horn (1981) 3x3 gradient; the
local incidence angle combines them with the ellipsoid incidence band and
the (right-looking) radar look direction; flattening rescales linear
backscatter by a surface ("direct") or volume scattering model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .focal import GEOGRAPHIC_CRS
from .grid import (
    GeoTransform,
    OrbitPass,
    RasterGrid,
    Units,
    require_same_geometry,
    require_units,
)

DEFAULT_MAX_SLOPE_DEG = 15.0


@dataclass(frozen=True)
class SarGeometry:
    """Acquisition geometry: per-pixel ellipsoid incidence plus track info."""

    incidence: RasterGrid
    heading_deg: float
    orbit_pass: OrbitPass

    def __post_init__(self):
        require_units(self.incidence, Units.DEGREES)

    @property
    def look_azimuth_deg(self) -> float:
        """Beam direction over ground, clockwise from north (right-looking)."""
        return (self.heading_deg + 90.0) % 360.0


def _metric_spacing(transform: GeoTransform, crs_id: str,
                    meters_per_degree: tuple[float, float] | None) -> tuple[float, float]:
    """Signed pixel spacing in meters along x (cols) and y (rows)."""
    if meters_per_degree is not None:
        mx, my = meters_per_degree
        if mx <= 0 or my <= 0:
            raise ParameterError("meters_per_degree values must be positive")
        return transform.pixel_w * mx, transform.pixel_h * my
    if crs_id in GEOGRAPHIC_CRS:
        raise ParameterError(
            f"{crs_id} is geographic; supply a meters-per-degree pair to "
            "convert DEM pixel spacing to meters"
        )
    return transform.pixel_w, transform.pixel_h


def _neighbor(values: np.ndarray, valid: np.ndarray, dy: int, dx: int):
    """Shifted neighbor plane; out-of-bounds cells come back invalid."""
    h, w = values.shape
    pv = np.pad(values, 1)
    pk = np.pad(valid, 1)
    return pv[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w], pk[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]


def slope_aspect(dem: RasterGrid,
                 meters_per_degree: tuple[float, float] | None = None
                 ) -> tuple[RasterGrid, RasterGrid]:
    """Horn 3x3 slope (degrees) and downslope-facing aspect.

    Aspect is the compass direction the surface faces (clockwise from
    north, 0 for flat ground): a plane rising to the east faces west,
    aspect 270.  Missing neighbors take the center elevation; pixels with
    fewer than 4 valid neighbors are invalid.
    """
    require_units(dem, Units.METERS)
    sx, sy = _metric_spacing(dem.transform, dem.crs_id, meters_per_degree)

    z = dem.values
    planes = {}
    n_valid = np.zeros(dem.shape)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nz, nk = _neighbor(z, dem.valid, dy, dx)
            planes[dy, dx] = np.where(nk, nz, z)
            n_valid += nk

    east = planes[-1, 1] + 2.0 * planes[0, 1] + planes[1, 1]
    west = planes[-1, -1] + 2.0 * planes[0, -1] + planes[1, -1]
    south = planes[1, -1] + 2.0 * planes[1, 0] + planes[1, 1]
    north = planes[-1, -1] + 2.0 * planes[-1, 0] + planes[-1, 1]
    gx = (east - west) / (8.0 * sx)
    gy = (south - north) / (8.0 * sy)  # d(elevation)/d(northing), sign via sy

    steep = np.hypot(gx, gy)
    slope = np.degrees(np.arctan(steep))
    aspect = np.where(steep > 0, np.degrees(np.arctan2(-gx, -gy)) % 360.0, 0.0)

    out_valid = dem.valid & (n_valid >= 4)
    slope = np.where(out_valid, slope, 0.0)
    aspect = np.where(out_valid, aspect, 0.0)
    t, c = dem.transform, dem.crs_id
    return (RasterGrid(slope, out_valid, t, c, Units.DEGREES),
            RasterGrid(aspect, out_valid.copy(), t, c, Units.DEGREES))


@dataclass(frozen=True)
class _LocalGeometry:
    """Per-pixel view geometry shared by local_incidence and flatten."""

    cos_lia: np.ndarray
    range_tilt_rad: np.ndarray  # slope projected into the range plane, + toward sensor
    theta_rad: np.ndarray
    layover: np.ndarray
    shadow: np.ndarray
    valid: np.ndarray


def _local_geometry(dem: RasterGrid, geom: SarGeometry,
                    meters_per_degree: tuple[float, float] | None) -> _LocalGeometry:
    if geom is None:
        raise ParameterError("terrain operations need a SarGeometry (incidence + heading)")
    require_same_geometry(dem, geom.incidence, "DEM and incidence band")
    slope, aspect = slope_aspect(dem, meters_per_degree)

    alpha = np.radians(slope.values)
    theta = np.radians(geom.incidence.values)
    rel = np.radians(aspect.values - geom.look_azimuth_deg)

    cos_lia = np.cos(alpha) * np.cos(theta) - np.sin(alpha) * np.sin(theta) * np.cos(rel)
    # Tilt of the surface within the vertical plane of the look direction;
    # positive when the ground rises toward the sensor.
    range_tilt = np.arctan(-np.tan(alpha) * np.cos(rel))

    base = slope.valid & geom.incidence.valid
    layover = base & (range_tilt > theta)
    shadow = base & (cos_lia <= 0)
    return _LocalGeometry(cos_lia, range_tilt, theta, layover, shadow,
                          base & ~layover & ~shadow)


def local_incidence(dem: RasterGrid, geom: SarGeometry,
                    meters_per_degree: tuple[float, float] | None = None) -> RasterGrid:
    """Angle between the local surface normal and the radar look vector.

    Layover (range-plane tilt toward the sensor exceeding the incidence
    angle) and shadow (local incidence >= 90 degrees) pixels are invalid.
    """
    g = _local_geometry(dem, geom, meters_per_degree)
    lia = np.degrees(np.arccos(np.clip(g.cos_lia, -1.0, 1.0)))
    lia = np.where(g.valid, lia, 0.0)
    return RasterGrid(lia, g.valid, dem.transform, dem.crs_id, Units.DEGREES)


def layover_shadow(dem: RasterGrid, geom: SarGeometry,
                   meters_per_degree: tuple[float, float] | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Boolean layover and shadow masks for the given geometry."""
    g = _local_geometry(dem, geom, meters_per_degree)
    return g.layover, g.shadow


def flatten(grid: RasterGrid, dem: RasterGrid, geom: SarGeometry,
            model: str = "direct",
            meters_per_degree: tuple[float, float] | None = None) -> RasterGrid:
    """Radiometric slope correction of linear backscatter.

    direct: out = in * cos(theta_lia) / cos(theta_ref), theta_ref the
    per-pixel ellipsoid incidence.  volume: out = in * tan(90 - theta_ref)
    / tan(90 - theta_ref + range_tilt), the volume-scattering tangent-ratio
    model.  Zero slope leaves the input bit-for-bit unchanged; layover and
    shadow pixels are invalid.
    """
    require_units(grid, Units.LINEAR)
    require_same_geometry(grid, dem, "scene and DEM")
    g = _local_geometry(dem, geom, meters_per_degree)

    if model == "direct":
        factor = g.cos_lia / np.cos(g.theta_rad)
    elif model == "volume":
        comp = np.pi / 2.0 - g.theta_rad
        factor = np.tan(comp) / np.tan(comp + g.range_tilt_rad)
        factor = np.maximum(factor, 0.0)
    else:
        raise ParameterError(f"unknown flattening model {model!r}; expected direct or volume")

    out_valid = grid.valid & g.valid
    out = np.where(out_valid, grid.values * factor, 0.0)
    return grid.with_values(out, valid=out_valid)


def slope_mask(grid: RasterGrid, dem: RasterGrid,
               max_slope_deg: float = DEFAULT_MAX_SLOPE_DEG,
               meters_per_degree: tuple[float, float] | None = None) -> RasterGrid:
    """Invalidate pixels on slopes steeper than max_slope_deg.

    Kept pixels pass through untouched.  Pixels whose slope could not be
    computed (too few valid DEM neighbors) are masked as well.
    """
    if max_slope_deg <= 0:
        raise ParameterError(f"max_slope_deg must be positive, got {max_slope_deg}")
    require_same_geometry(grid, dem, "scene and DEM")
    slope, _ = slope_aspect(dem, meters_per_degree)
    keep = grid.valid & slope.valid & (slope.values <= max_slope_deg)
    return grid.with_values(grid.values.copy(), valid=keep)
