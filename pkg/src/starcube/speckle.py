"""Speckle filters for linear-power SAR grids.

All filters assume fully-developed multiplicative speckle with mean 1 and
coefficient of variation Cu = 1/sqrt(L) for L equivalent looks.  They share
the MMSE estimator of Lee (1980): out = m + W*(p - m) with W derived from
window statistics.  Inputs must be in linear power, never dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from statistics import NormalDist

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .focal import focal_stats, window_sums
from .grid import RasterGrid, StackLayer, TimeStack, Units, require_units


@dataclass(frozen=True)
class SpeckleParams:
    """Shared filter parameters.

    looks: equivalent number of looks of the input (default 4.4, the usual
    working value for Sentinel-1 IW GRD).
    radius: half window size for boxcar/lee/gamma_map/lee_sigma.
    sigma_xi: Lee-sigma coverage parameter, in (0, 1).
    target_percentile / target_min_neighbors: point-target detection rule
    for lee_sigma.
    """

    looks: float = 4.4
    radius: int = 2
    sigma_xi: float = 0.9
    target_percentile: float = 98.0
    target_min_neighbors: int = 5

    def __post_init__(self):
        if not self.looks > 0:
            raise ParameterError(f"looks must be > 0, got {self.looks}")
        if self.radius < 1:
            raise ParameterError(f"radius must be >= 1, got {self.radius}")
        if not 0 < self.sigma_xi < 1:
            raise ParameterError(f"sigma_xi must be in (0,1), got {self.sigma_xi}")


class PixelClass:
    HOMOGENEOUS = 0
    HETEROGENEOUS = 1
    POINT_TARGET = 2


def _mmse(mean, var, pixel, cu2):
    """Lee MMSE blend of window mean and observation; weight in [0, 1]."""
    var_x = np.maximum(0.0, (var - mean * mean * cu2) / (1.0 + cu2))
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(var > 0, var_x / np.where(var > 0, var, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    return mean + w * (pixel - mean)


def boxcar(grid: RasterGrid, params: SpeckleParams) -> RasterGrid:
    """Plain moving-window mean."""
    mean, _ = focal_stats(grid, params.radius)
    return mean


def lee(grid: RasterGrid, params: SpeckleParams) -> RasterGrid:
    """Lee (1980) local-statistics MMSE filter."""
    mean, var = focal_stats(grid, params.radius)
    cu2 = 1.0 / params.looks
    out = _mmse(mean.values, var.values, grid.values, cu2)
    out = np.where(mean.valid, out, 0.0)
    return grid.with_values(out, valid=mean.valid.copy())


def gamma_map(grid: RasterGrid, params: SpeckleParams) -> RasterGrid:
    """Gamma maximum-a-posteriori filter (Lopes et al., 1990).

    Pixels are split by the observed coefficient of variation Ci:
    homogeneous (Ci <= Cu) take the window mean, point targets
    (Ci >= sqrt(2)*Cu) pass through, and the textured band in between takes
    the positive root of the Gamma-MAP estimate, clamped between window
    mean and observation.
    """
    mean, var = focal_stats(grid, params.radius)
    m = mean.values
    v = var.values
    p = grid.values
    L = params.looks
    cu = 1.0 / math.sqrt(L)
    cmax = math.sqrt(2.0) * cu

    out_valid = mean.valid & (m > 0)
    safe_m = np.where(out_valid, m, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ci = np.sqrt(v) / safe_m

        # (B*m + sqrt(m^2*B^2 + 4*alpha*L*m*p)) / (2*alpha), evaluated with
        # everything pre-divided by alpha so near-homogeneous pixels
        # (alpha -> inf) stay finite and tend to m.
        alpha = (1.0 + cu * cu) / np.maximum(ci * ci - cu * cu, 1e-300)
        r = 1.0 - (L + 1.0) / alpha  # B / alpha
        d = safe_m * safe_m * r * r + 4.0 * L * safe_m * p / alpha
        heterogeneous = (r * safe_m + np.sqrt(np.maximum(d, 0.0))) / 2.0
    heterogeneous = np.clip(heterogeneous, np.minimum(safe_m, p), np.maximum(safe_m, p))

    out = np.where(ci <= cu, safe_m, np.where(ci >= cmax, p, heterogeneous))
    out = np.where(out_valid, out, 0.0)
    return grid.with_values(out, valid=out_valid)


def classify_pixels(grid: RasterGrid, params: SpeckleParams) -> np.ndarray:
    """Homogeneous / heterogeneous / point-target map used by gamma_map."""
    mean, var = focal_stats(grid, params.radius)
    cu = 1.0 / math.sqrt(params.looks)
    with np.errstate(invalid="ignore", divide="ignore"):
        ci = np.sqrt(var.values) / np.where(mean.values > 0, mean.values, 1.0)
    out = np.full(grid.shape, PixelClass.HETEROGENEOUS, dtype=np.int8)
    out[ci <= cu] = PixelClass.HOMOGENEOUS
    out[ci >= math.sqrt(2.0) * cu] = PixelClass.POINT_TARGET
    return out


# Refined Lee: gradient axes between 3x3 sub-window means sampled on a
# 7x7 neighborhood, then MMSE over the half-window on the center's side.
# Sample offsets are in steps of 2 pixels; (dy, dx) endpoint pairs per axis:
_AXIS_ENDPOINTS = (
    ((-1, 0), (1, 0)),  # vertical (N vs S)
    ((-1, 1), (1, -1)),  # anti-diagonal (NE vs SW)
    ((0, 1), (0, -1)),  # horizontal (E vs W)
    ((1, 1), (-1, -1)),  # main diagonal (SE vs NW)
)


def _halfwindow_masks() -> np.ndarray:
    """Eight 7x7 directional half-windows, each including the center line.

    Direction index = axis + 4*side, side 0 being the first endpoint of
    the axis (N, NE, E, SE) and side 1 the opposite one.
    """
    dy, dx = np.mgrid[-3:4, -3:4]
    masks = np.zeros((8, 7, 7), dtype=np.float64)
    masks[0] = dy <= 0  # N
    masks[1] = dx >= dy  # NE
    masks[2] = dx >= 0  # E
    masks[3] = dy + dx >= 0  # SE
    masks[4] = dy >= 0  # S
    masks[5] = dx <= dy  # SW
    masks[6] = dx <= 0  # W
    masks[7] = dy + dx <= 0  # NW
    return masks


def refined_lee(grid: RasterGrid, params: SpeckleParams) -> RasterGrid:
    """Refined Lee filter: edge-directed MMSE on a fixed 7x7 window.

    The gradient direction is estimated from the four principal-axis
    differences of the 3x3 grid of 3x3 sub-window means (ties broken by
    lowest axis index); the filter then uses statistics of the 28-pixel
    half-window on the side whose endpoint mean is closest to the center
    sub-window mean.  Pixels where no axis is measurable, or where the
    chosen half-window holds fewer than 3 valid pixels, fall back to the
    3x3 MMSE prior.
    """
    require_units(grid, Units.LINEAR)
    if min(grid.width, grid.height) < 7:
        raise ParameterError("refined_lee needs a grid of at least 7x7 pixels")
    cu2 = 1.0 / params.looks
    h, w = grid.shape

    ones3 = np.ones((3, 3), dtype=np.float64)
    s1, _, n3 = window_sums(grid.values, grid.valid, ones3)
    has_sub = n3 >= 1
    with np.errstate(invalid="ignore", divide="ignore"):
        submean = np.where(has_sub, s1 / np.where(has_sub, n3, 1.0), 0.0)

    # Pad so that +-2 pixel sample offsets never leave the array; padded
    # cells carry has_sub=False and are treated as missing samples.
    pm = np.pad(submean, 2)
    ph = np.pad(has_sub, 2)

    def sample(dy, dx):
        oy, ox = 2 + 2 * dy, 2 + 2 * dx
        return pm[oy : oy + h, ox : ox + w], ph[oy : oy + h, ox : ox + w]

    center_mean, _ = sample(0, 0)
    grads = np.full((4, h, w), -np.inf)
    sides = np.zeros((4, h, w), dtype=np.int8)
    for axis, (e1, e2) in enumerate(_AXIS_ENDPOINTS):
        m1, ok1 = sample(*e1)
        m2, ok2 = sample(*e2)
        ok = ok1 & ok2
        grads[axis] = np.where(ok, np.abs(m1 - m2), -np.inf)
        # side 1 only when the second endpoint is strictly closer to center
        sides[axis] = (np.abs(m2 - center_mean) < np.abs(m1 - center_mean)).astype(np.int8)

    best_axis = np.argmax(grads, axis=0)
    measurable = np.take_along_axis(grads, best_axis[None], axis=0)[0] > -np.inf
    direction = best_axis + 4 * np.take_along_axis(sides, best_axis[None], axis=0)[0]

    masks = _halfwindow_masks()
    dir_mean = np.zeros((8, h, w))
    dir_var = np.zeros((8, h, w))
    dir_n = np.zeros((8, h, w))
    for d in range(8):
        ds1, ds2, dn = window_sums(grid.values, grid.valid, masks[d])
        with np.errstate(invalid="ignore", divide="ignore"):
            dm = np.where(dn > 0, ds1 / np.where(dn > 0, dn, 1.0), 0.0)
            dv = np.where(dn > 0, ds2 / np.where(dn > 0, dn, 1.0) - dm * dm, 0.0)
        dir_mean[d] = dm
        dir_var[d] = np.maximum(dv, 0.0)
        dir_n[d] = dn

    idx = direction[None]
    m_d = np.take_along_axis(dir_mean, idx, axis=0)[0]
    v_d = np.take_along_axis(dir_var, idx, axis=0)[0]
    n_d = np.take_along_axis(dir_n, idx, axis=0)[0]

    directional = _mmse(m_d, v_d, grid.values, cu2)
    prior = lee(grid, replace(params, radius=1))

    use_dir = measurable & (n_d >= 3)
    out = np.where(use_dir, directional, prior.values)
    out_valid = grid.valid & (use_dir | prior.valid)
    out = np.where(out_valid, out, 0.0)
    return grid.with_values(out, valid=out_valid)


def lee_sigma(grid: RasterGrid, params: SpeckleParams) -> RasterGrid:
    """Sigma-range Lee filter with point-target preservation.

    Bright scatterers (above the scene's target percentile with enough
    equally bright 3x3 neighbors) pass through untouched.  Everywhere else
    an a-priori 3x3 MMSE estimate centers a multiplicative sigma band of
    coverage xi, and the MMSE estimate is recomputed from window pixels
    inside the band; fewer than 3 selected pixels fall back to the prior.
    """
    require_units(grid, Units.LINEAR)
    cu = 1.0 / math.sqrt(params.looks)
    k = NormalDist().inv_cdf((1.0 + params.sigma_xi) / 2.0)
    band = params.sigma_xi * cu * k

    vals = grid.valid_values()
    if vals.size == 0:
        return grid.copy()
    z_hi = np.quantile(vals, params.target_percentile / 100.0)
    candidate = grid.valid & (grid.values > z_hi)
    neighbor_count = (
        ndimage.correlate(candidate.astype(np.float64), np.ones((3, 3)), mode="constant")
        - candidate
    )
    retain = candidate & (neighbor_count >= params.target_min_neighbors)

    prior = lee(grid, replace(params, radius=1))
    lo = prior.values * (1.0 - band)
    hi = prior.values * (1.0 + band)

    r = params.radius
    h, w = grid.shape
    pv = np.pad(grid.values, r)
    pok = np.pad(grid.valid, r)
    n_sel = np.zeros((h, w))
    s1 = np.zeros((h, w))
    s2 = np.zeros((h, w))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            v_off = pv[r + dy : r + dy + h, r + dx : r + dx + w]
            ok = (
                pok[r + dy : r + dy + h, r + dx : r + dx + w]
                & (v_off >= lo)
                & (v_off <= hi)
            )
            n_sel += ok
            s1 += np.where(ok, v_off, 0.0)
            s2 += np.where(ok, v_off * v_off, 0.0)

    enough = n_sel >= 3
    with np.errstate(invalid="ignore", divide="ignore"):
        m_s = np.where(enough, s1 / np.where(enough, n_sel, 1.0), 0.0)
        v_s = np.where(enough, s2 / np.where(enough, n_sel, 1.0) - m_s * m_s, 0.0)
    filtered = _mmse(m_s, np.maximum(v_s, 0.0), grid.values, cu * cu)

    out = np.where(enough, filtered, prior.values)
    out = np.where(retain, grid.values, out)
    out_valid = grid.valid & (retain | prior.valid)
    out = np.where(out_valid, out, 0.0)
    return grid.with_values(out, valid=out_valid)


FILTERS = {
    "boxcar": boxcar,
    "lee": lee,
    "refined_lee": refined_lee,
    "gamma_map": gamma_map,
    "lee_sigma": lee_sigma,
}


def multitemporal(stack: TimeStack, base_filter: str, params: SpeckleParams) -> TimeStack:
    """Quegan-Yu multi-temporal filter over a co-registered stack.

    With per-layer filtered estimates s_j, layer k becomes
    (s_k / N) * sum_j(x_j / s_j): the stable spatial structure of layer k
    scaled by the stack-averaged residual speckle ratio.  A single-layer
    stack is returned unchanged.
    """
    if len(stack) == 0:
        raise ParameterError("multitemporal filter needs a non-empty stack")
    if base_filter not in FILTERS:
        raise ParameterError(
            f"unknown base filter {base_filter!r}; expected one of {sorted(FILTERS)}"
        )
    if len(stack) == 1:
        layer = stack.layers[0]
        return TimeStack([replace(layer, grid=layer.grid.copy())])

    filt = FILTERS[base_filter]
    smoothed = [filt(layer.grid, params) for layer in stack]

    common = np.ones(stack.layers[0].grid.shape, dtype=bool)
    for est in smoothed:
        common &= est.valid & (est.values > 0)

    ratio_sum = np.zeros(stack.layers[0].grid.shape)
    for layer, est in zip(stack.layers, smoothed):
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio_sum += np.where(common, layer.grid.values / np.where(common, est.values, 1.0), 0.0)

    n = float(len(stack))
    out_layers = []
    for layer, est in zip(stack.layers, smoothed):
        out = np.where(common, est.values / n * ratio_sum, 0.0)
        out_layers.append(replace(layer, grid=layer.grid.with_values(out, valid=common.copy())))
    return TimeStack(out_layers)
