"""Grid, kernel and stack primitives shared by every processing step.

A :class:`RasterGrid` is a single-band float64 image with an affine
geotransform, a validity mask (nodata handling) and a units tag.  All
operations in this package treat grids as immutable: they never write
into an input array and always return new grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

import numpy as np

from .errors import AlignmentError, ParameterError


class Units(str, Enum):
    DB = "dB"
    LINEAR = "linear"
    DEGREES = "degrees"
    METERS = "meters"
    DIMENSIONLESS = "dimensionless"


class OrbitPass(str, Enum):
    ASC = "ASC"
    DESC = "DESC"


class Polarization(str, Enum):
    VV = "VV"
    VH = "VH"


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel-to-CRS mapping (axis-aligned, no rotation).

    ``pixel_h`` is negative for north-up grids.  Pixel (row, col) covers
    the square whose upper-left corner is at
    ``(origin_x + col * pixel_w, origin_y + row * pixel_h)``.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float

    def __post_init__(self):
        if not self.pixel_w > 0:
            raise ParameterError(f"pixel_w must be > 0, got {self.pixel_w}")
        if self.pixel_h == 0:
            raise ParameterError("pixel_h must be nonzero")

    def pixel_center(self, row, col):
        """CRS coordinates of the center of pixel (row, col)."""
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_w
        y = self.origin_y + (np.asarray(row) + 0.5) * self.pixel_h
        return x, y

    def fractional_index(self, x, y):
        """Fractional (row, col) whose pixel center falls on (x, y)."""
        col = (np.asarray(x) - self.origin_x) / self.pixel_w - 0.5
        row = (np.asarray(y) - self.origin_y) / self.pixel_h - 0.5
        return row, col

    def approx_equal(self, other: "GeoTransform", tol: float = 1e-9) -> bool:
        return (
            abs(self.origin_x - other.origin_x) <= tol
            and abs(self.origin_y - other.origin_y) <= tol
            and abs(self.pixel_w - other.pixel_w) <= tol
            and abs(self.pixel_h - other.pixel_h) <= tol
        )


@dataclass
class RasterGrid:
    """Single-band 2D float64 grid with geotransform and validity mask."""

    values: np.ndarray
    valid: np.ndarray
    transform: GeoTransform
    crs_id: str
    units: Units

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2:
            raise ParameterError(f"values must be 2D, got shape {self.values.shape}")
        if self.valid.shape != self.values.shape:
            raise AlignmentError(
                f"valid mask shape {self.valid.shape} != values shape {self.values.shape}"
            )
        self.units = Units(self.units)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def full(cls, height, width, value, transform, crs_id, units) -> "RasterGrid":
        """Constant grid, all pixels valid."""
        return cls(
            values=np.full((height, width), float(value), dtype=np.float64),
            valid=np.ones((height, width), dtype=bool),
            transform=transform,
            crs_id=crs_id,
            units=units,
        )

    def copy(self) -> "RasterGrid":
        return RasterGrid(
            self.values.copy(), self.valid.copy(), self.transform, self.crs_id, self.units
        )

    def with_values(self, values, valid=None, units=None) -> "RasterGrid":
        """New grid on the same geometry with replaced values/mask/units."""
        return RasterGrid(
            values=values,
            valid=self.valid.copy() if valid is None else valid,
            transform=self.transform,
            crs_id=self.crs_id,
            units=self.units if units is None else units,
        )

    def same_geometry(self, other: "RasterGrid") -> bool:
        return (
            self.shape == other.shape
            and self.crs_id == other.crs_id
            and self.transform.approx_equal(other.transform)
        )

    def valid_values(self) -> np.ndarray:
        return self.values[self.valid]


def require_units(grid: RasterGrid, *allowed: Units):
    from .errors import UnitsError

    if grid.units not in allowed:
        names = ", ".join(u.value for u in allowed)
        raise UnitsError(f"expected units in {{{names}}}, got {grid.units.value}")


def require_same_geometry(a: RasterGrid, b: RasterGrid, what: str = "grids"):
    if not a.same_geometry(b):
        raise AlignmentError(
            f"{what} are not co-registered: "
            f"{a.shape}/{a.crs_id} vs {b.shape}/{b.crs_id}"
        )


class KernelShape(str, Enum):
    SQUARE = "square"
    CIRCLE = "circle"


@dataclass(frozen=True)
class Kernel:
    """Small (2r+1)x(2r+1) weight matrix anchored at its center pixel.

    Circle kernels zero every weight whose pixel-center distance from the
    anchor exceeds the radius.  Normalized kernels sum to 1.
    """

    radius: int
    shape: KernelShape
    weights: np.ndarray = field(compare=False)
    normalized: bool

    def __post_init__(self):
        side = 2 * self.radius + 1
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (side, side):
            raise ParameterError(f"kernel weights must be {side}x{side}, got {w.shape}")
        object.__setattr__(self, "weights", w)
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"normalized kernel weights sum to {w.sum()}, not 1")

    @classmethod
    def square(cls, radius: int, normalized: bool = True) -> "Kernel":
        if radius < 0:
            raise ParameterError("kernel radius must be >= 0")
        side = 2 * radius + 1
        w = np.ones((side, side), dtype=np.float64)
        if normalized:
            w /= w.sum()
        return cls(radius=radius, shape=KernelShape.SQUARE, weights=w, normalized=normalized)

    @classmethod
    def circle(cls, radius: int, normalized: bool = True) -> "Kernel":
        if radius < 0:
            raise ParameterError("kernel radius must be >= 0")
        side = 2 * radius + 1
        dy, dx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
        w = (np.hypot(dx, dy) <= radius).astype(np.float64)
        if normalized:
            w /= w.sum()
        return cls(radius=radius, shape=KernelShape.CIRCLE, weights=w, normalized=normalized)

    @classmethod
    def identity(cls) -> "Kernel":
        return cls.square(0)

    def footprint(self) -> np.ndarray:
        """Boolean mask of cells with nonzero weight."""
        return self.weights != 0


@dataclass(frozen=True)
class StackLayer:
    grid: RasterGrid
    timestamp: datetime
    orbit_pass: OrbitPass
    relative_orbit: int
    polarization: Polarization


@dataclass
class TimeStack:
    """Ordered, co-registered stack of grids with acquisition metadata."""

    layers: list[StackLayer]

    def __post_init__(self):
        if not self.layers:
            return
        first = self.layers[0].grid
        for layer in self.layers[1:]:
            if not first.same_geometry(layer.grid):
                raise AlignmentError("stack layers are not co-registered")
            if layer.grid.units != first.units:
                raise AlignmentError("stack layers have mixed units")
        times = [layer.timestamp for layer in self.layers]
        if any(t1 < t0 for t0, t1 in zip(times, times[1:])):
            raise ParameterError("stack timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    @property
    def grids(self) -> list[RasterGrid]:
        return [layer.grid for layer in self.layers]
