"""Smoothing and connected-component utilities for classification masks.

Smoothing sharpens the tonal separation before thresholding (mean or
median over a kernel footprint); connected-component counting and
minimum-size filtering remove speckle-sized false positives from binary
water masks.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .focal import convolve
from .grid import Kernel, RasterGrid, Units

DEFAULT_MIN_PIXELS = 8
DEFAULT_MAX_COUNT = 1024


class Connectivity(str, Enum):
    FOUR = "four"
    EIGHT = "eight"

    @property
    def structure(self) -> np.ndarray:
        return ndimage.generate_binary_structure(2, 1 if self is Connectivity.FOUR else 2)


DEFAULT_CONNECTIVITY = Connectivity.EIGHT


def require_binary(mask: RasterGrid):
    """Raise unless every valid pixel is 0 or 1."""
    vals = mask.valid_values()
    if vals.size and not np.isin(vals, (0.0, 1.0)).all():
        raise ParameterError("mask is not binary: valid values outside {0, 1}")


def binary_mask(values: np.ndarray, valid: np.ndarray, template: RasterGrid) -> RasterGrid:
    """Package a boolean array as a {0,1} mask on the template's grid."""
    out = RasterGrid(np.asarray(values, dtype=np.float64), valid,
                     template.transform, template.crs_id, Units.DIMENSIONLESS)
    require_binary(out)
    return out


def smooth(grid: RasterGrid, kernel: Kernel, mode: str = "mean") -> RasterGrid:
    """Kernel smoothing: weighted mean or footprint median.

    The median is the lower median (an observed value) over valid pixels
    in the kernel footprint, matching the compositing convention.
    """
    if mode == "mean":
        return convolve(grid, kernel)
    if mode != "median":
        raise ParameterError(f"unknown smoothing mode {mode!r}; expected mean or median")

    fp = kernel.footprint()
    r = kernel.radius
    h, w = grid.shape
    pv = np.pad(grid.values, r)
    pk = np.pad(grid.valid, r)
    stack = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if not fp[r + dy, r + dx]:
                continue
            v = pv[r + dy : r + dy + h, r + dx : r + dx + w]
            ok = pk[r + dy : r + dy + h, r + dx : r + dx + w]
            stack.append(np.where(ok, v, np.inf))
    stack = np.sort(np.stack(stack), axis=0)
    n = np.sum(np.isfinite(stack), axis=0)
    idx = np.maximum(n - 1, 0) // 2
    med = np.take_along_axis(stack, idx[None], axis=0)[0]

    out_valid = grid.valid & (n >= 1)
    med = np.where(out_valid, med, 0.0)
    return grid.with_values(med, valid=out_valid)


def _component_sizes(mask: RasterGrid, conn: Connectivity):
    """Label foreground and return (labels, size-per-label array)."""
    require_binary(mask)
    fg = mask.valid & (mask.values == 1.0)
    labels, n = ndimage.label(fg, structure=conn.structure)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    return labels, sizes


def connected_pixel_count(mask: RasterGrid, conn: Connectivity = DEFAULT_CONNECTIVITY,
                          max_count: int = DEFAULT_MAX_COUNT) -> RasterGrid:
    """Size of each pixel's connected component, saturated at max_count.

    Background and invalid pixels count 0.
    """
    if max_count <= 0:
        raise ParameterError(f"max_count must be positive, got {max_count}")
    labels, sizes = _component_sizes(mask, conn)
    counts = np.minimum(sizes[labels], max_count).astype(np.float64)
    counts = np.where(mask.valid, counts, 0.0)
    return mask.with_values(counts, units=Units.DIMENSIONLESS)


def filter_min_size(mask: RasterGrid, conn: Connectivity = DEFAULT_CONNECTIVITY,
                    min_pixels: int = DEFAULT_MIN_PIXELS) -> RasterGrid:
    """Zero out connected components smaller than min_pixels."""
    if min_pixels < 1:
        raise ParameterError(f"min_pixels must be >= 1, got {min_pixels}")
    labels, sizes = _component_sizes(mask, conn)
    keep = sizes[labels] >= min_pixels
    out = np.where(mask.valid & keep, mask.values, 0.0)
    return mask.with_values(out)
