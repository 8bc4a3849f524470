"""Temporal stack alignment and per-pixel compositing.

Scenes from different acquisitions rarely share an exact pixel grid, so
stacks are first resampled onto a common target, then reduced per pixel
(valid values only) to a single composite.  Median uses the lower median
so the composite value is always one actually observed.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ParameterError
from .focal import resample_to
from .grid import (
    GeoTransform,
    OrbitPass,
    RasterGrid,
    StackLayer,
    TimeStack,
    Units,
    require_same_geometry,
    require_units,
)

COMPOSITE_STATS = ("mean", "median", "min", "max")


def align_stack(layers: list[StackLayer], transform: GeoTransform,
                width: int, height: int, crs_id: str) -> TimeStack:
    """Resample layers onto a shared grid and sort them by timestamp.

    Layers already on the target grid pass through bit-identically; the
    rest are interpolated bilinearly.
    """
    if not layers:
        raise ParameterError("align_stack needs at least one layer")
    template = RasterGrid(np.zeros((height, width)), np.ones((height, width), dtype=bool),
                          transform, crs_id, layers[0].grid.units)
    out = []
    for layer in layers:
        if layer.grid.same_geometry(template):
            out.append(replace(layer, grid=layer.grid.copy()))
        else:
            grid = resample_to(layer.grid, transform, width, height,
                               crs_id=crs_id, method="bilinear")
            out.append(replace(layer, grid=grid))
    out.sort(key=lambda l: l.timestamp)
    return TimeStack(out)


def _reduce(values: np.ndarray, ok: np.ndarray, stat: str):
    """Per-pixel statistic over the layer axis, ignoring invalid entries."""
    n = ok.sum(axis=0)
    if stat == "mean":
        s = np.where(ok, values, 0.0).sum(axis=0)
        out = np.where(n > 0, s / np.maximum(n, 1), 0.0)
    elif stat == "min":
        out = np.where(ok, values, np.inf).min(axis=0)
    elif stat == "max":
        out = np.where(ok, values, -np.inf).max(axis=0)
    elif stat == "median":
        ordered = np.sort(np.where(ok, values, np.inf), axis=0)
        idx = np.maximum(n - 1, 0) // 2
        out = np.take_along_axis(ordered, idx[None], axis=0)[0]
    else:
        raise ParameterError(f"unknown composite stat {stat!r}; expected one of {COMPOSITE_STATS}")
    return np.where(n > 0, out, 0.0), n > 0


def composite(stack: TimeStack, stat: str = "median") -> RasterGrid:
    """Reduce a co-registered stack to one grid; gaps filled by any valid layer."""
    if len(stack) == 0:
        raise ParameterError("cannot composite an empty stack")
    values = np.stack([g.values for g in stack.grids])
    ok = np.stack([g.valid for g in stack.grids])
    out, out_valid = _reduce(values, ok, stat)
    return stack.grids[0].with_values(out, valid=out_valid)


def composite_by_pass(stack: TimeStack, stat: str = "median") -> RasterGrid:
    """Composite ascending and descending passes separately, then merge.

    Different orbit paths never align perfectly, so each pass is reduced
    on its own and the merge takes the per-pixel mean of whichever passes
    are valid there.
    """
    per_pass = []
    for p in OrbitPass:
        layers = [l for l in stack if l.orbit_pass == p]
        if layers:
            per_pass.append(composite(TimeStack(sorted(layers, key=lambda l: l.timestamp)), stat))
    if not per_pass:
        raise ParameterError("cannot composite an empty stack")
    if len(per_pass) == 1:
        return per_pass[0]
    values = np.stack([g.values for g in per_pass])
    ok = np.stack([g.valid for g in per_pass])
    out, out_valid = _reduce(values, ok, "mean")
    return per_pass[0].with_values(out, valid=out_valid)


def band_combine(vv: RasterGrid, vh: RasterGrid, combo: str) -> RasterGrid:
    """Dual-pol band arithmetic to boost class separability.

    sum = vv+vh, diff = vv-vh, ratio = vh/vv, rvi = 4*vh/(vv+vh); the
    ratios are invalid where their denominator is not positive.
    """
    require_units(vv, Units.LINEAR)
    require_units(vh, Units.LINEAR)
    require_same_geometry(vv, vh, "VV and VH bands")
    both = vv.valid & vh.valid
    a, b = vv.values, vh.values

    if combo == "sum":
        out, ok, units = a + b, both, Units.LINEAR
    elif combo == "diff":
        out, ok, units = a - b, both, Units.LINEAR
    elif combo == "ratio":
        ok = both & (a > 0)
        out = np.where(ok, b / np.where(a > 0, a, 1.0), 0.0)
        units = Units.DIMENSIONLESS
    elif combo == "rvi":
        ok = both & (a + b > 0)
        out = np.where(ok, 4.0 * b / np.where(a + b > 0, a + b, 1.0), 0.0)
        units = Units.DIMENSIONLESS
    else:
        raise ParameterError(f"unknown band combination {combo!r}")
    out = np.where(ok, out, 0.0)
    return RasterGrid(out, ok, vv.transform, vv.crs_id, units)
