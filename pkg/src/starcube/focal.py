"""Windowed statistics, convolution, resampling and pixel areas.

Edge policy for every focal operation is shrink-to-valid: statistics and
kernel weights are renormalized over the in-bounds valid pixels of each
window.  Windows are never mirrored or wrapped, so masks stay honest.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ParameterError, ProjectionError
from .grid import GeoTransform, Kernel, RasterGrid, Units, require_units

# EPSG codes treated as geographic (degree units).  Anything else is
# assumed metric unless a meters-per-degree pair is supplied.
GEOGRAPHIC_CRS = {"EPSG:4326", "EPSG:4258", "EPSG:4269", "CRS:84"}


def window_sums(values: np.ndarray, valid: np.ndarray, weights: np.ndarray):
    """Per-pixel weighted sums of values, squared values and weights over
    the valid in-bounds window.  Out-of-bounds contributes zero."""
    v = np.where(valid, values, 0.0)
    s1 = ndimage.correlate(v, weights, mode="constant", cval=0.0)
    s2 = ndimage.correlate(v * v, weights, mode="constant", cval=0.0)
    n = ndimage.correlate(valid.astype(np.float64), weights, mode="constant", cval=0.0)
    return s1, s2, n


def focal_stats(grid: RasterGrid, radius: int) -> tuple[RasterGrid, RasterGrid]:
    """Per-pixel mean and population variance over the (2r+1)^2 window.

    Output pixels are valid iff the center pixel is valid and at least two
    valid pixels fall in the window.
    """
    require_units(grid, Units.LINEAR)
    if radius < 1:
        raise ParameterError(f"focal radius must be >= 1, got {radius}")
    if radius > min(grid.width, grid.height) / 2:
        raise ParameterError(
            f"focal radius {radius} exceeds half the grid extent "
            f"({grid.width}x{grid.height})"
        )
    side = 2 * radius + 1
    ones = np.ones((side, side), dtype=np.float64)
    s1, s2, n = window_sums(grid.values, grid.valid, ones)

    out_valid = grid.valid & (n >= 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(out_valid, s1 / n, np.nan)
        var = np.where(out_valid, s2 / n - mean * mean, np.nan)
    var = np.where(out_valid, np.maximum(var, 0.0), np.nan)

    mean_grid = grid.with_values(np.where(out_valid, mean, 0.0), valid=out_valid)
    var_grid = grid.with_values(
        np.where(out_valid, var, 0.0), valid=out_valid.copy(), units=Units.DIMENSIONLESS
    )
    return mean_grid, var_grid


def convolve(grid: RasterGrid, kernel: Kernel) -> RasterGrid:
    """Kernel-weighted sum with weights renormalized to the valid subset.

    For a normalized kernel this is the weighted mean of the valid window;
    for an unnormalized kernel the result is scaled back to the full kernel
    sum so that fully-valid interior windows are unaffected.  Output pixels
    are valid iff the center is valid and some valid pixel carries weight.
    """
    require_units(grid, Units.DB, Units.LINEAR)
    w = kernel.weights
    v = np.where(grid.valid, grid.values, 0.0)
    num = ndimage.correlate(v, w, mode="constant", cval=0.0)
    den = ndimage.correlate(grid.valid.astype(np.float64), w, mode="constant", cval=0.0)

    out_valid = grid.valid & (den > 0)
    total = w.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(out_valid, num / den * total, 0.0)
    return grid.with_values(out, valid=out_valid)


def resample_to(
    grid: RasterGrid,
    target: GeoTransform,
    width: int,
    height: int,
    crs_id: str | None = None,
    method: str = "bilinear",
) -> RasterGrid:
    """Sample the grid onto a new geotransform in the same CRS.

    ``nearest`` preserves the exact value set; ``bilinear`` marks an output
    pixel invalid when any source pixel contributing weight is invalid or
    out of bounds.
    """
    crs_id = grid.crs_id if crs_id is None else crs_id
    if crs_id != grid.crs_id:
        raise ProjectionError(
            f"cannot resample across CRS ({grid.crs_id} -> {crs_id}); "
            "pre-project inputs to a single CRS first"
        )
    if method not in ("nearest", "bilinear"):
        raise ParameterError(f"unknown resampling method {method!r}")

    src = grid.transform
    x = target.origin_x + (np.arange(width) + 0.5) * target.pixel_w
    y = target.origin_y + (np.arange(height) + 0.5) * target.pixel_h
    fcol = (x - src.origin_x) / src.pixel_w - 0.5
    frow = (y - src.origin_y) / src.pixel_h - 0.5
    fr = np.broadcast_to(frow[:, None], (height, width))
    fc = np.broadcast_to(fcol[None, :], (height, width))

    h, w = grid.shape
    if method == "nearest":
        ir = np.floor(fr + 0.5).astype(np.int64)
        ic = np.floor(fc + 0.5).astype(np.int64)
        inb = (ir >= 0) & (ir < h) & (ic >= 0) & (ic < w)
        irc = np.clip(ir, 0, h - 1)
        icc = np.clip(ic, 0, w - 1)
        out = np.where(inb, grid.values[irc, icc], 0.0)
        out_valid = inb & grid.valid[irc, icc]
        return RasterGrid(out, out_valid, target, crs_id, grid.units)

    r0 = np.floor(fr).astype(np.int64)
    c0 = np.floor(fc).astype(np.int64)
    wr = fr - r0
    wc = fc - c0
    out = np.zeros((height, width), dtype=np.float64)
    out_valid = np.ones((height, width), dtype=bool)
    for dr, dc, wt in (
        (0, 0, (1 - wr) * (1 - wc)),
        (0, 1, (1 - wr) * wc),
        (1, 0, wr * (1 - wc)),
        (1, 1, wr * wc),
    ):
        rr = r0 + dr
        cc = c0 + dc
        contributes = wt > 0
        inb = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        rrc = np.clip(rr, 0, h - 1)
        ccc = np.clip(cc, 0, w - 1)
        ok = inb & grid.valid[rrc, ccc]
        out += np.where(contributes & ok, wt * grid.values[rrc, ccc], 0.0)
        out_valid &= ok | ~contributes
    out = np.where(out_valid, out, 0.0)
    return RasterGrid(out, out_valid, target, crs_id, grid.units)


def pixel_area_m2(grid: RasterGrid, meters_per_degree: tuple[float, float] | None = None) -> float:
    """Per-pixel area in square meters.

    Metric CRS: |pixel_w * pixel_h| directly.  Geographic CRS requires an
    explicit (m/deg in x, m/deg in y) pair; no ellipsoid math is applied.
    """
    t = grid.transform
    if meters_per_degree is not None:
        mx, my = meters_per_degree
        if mx <= 0 or my <= 0:
            raise ParameterError("meters_per_degree values must be positive")
        return abs(t.pixel_w * mx * t.pixel_h * my)
    if grid.crs_id in GEOGRAPHIC_CRS:
        raise ParameterError(
            f"{grid.crs_id} is geographic; supply a meters-per-degree pair "
            "(config key area.meters_per_degree) to compute pixel areas"
        )
    return abs(t.pixel_w * t.pixel_h)
