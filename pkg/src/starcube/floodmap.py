"""Otsu thresholding, chessboard segmentation, and flood-extent reporting.

The water/land threshold is found on dB histograms by maximizing the
between-class variance sigma_B^2(t) = w0*w1*(mu0-mu1)^2 over every bin
cut point (Otsu, 1979), with ties resolved toward the lowest threshold.
Because the global histogram of a mostly-dry scene is rarely bimodal,
chessboard segmentation first hunts for locally bimodal cells and pools
only those.  Water masks are thresholded, despeckled by minimum object
size, and differenced into a flood report.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .calibration import DEFAULT_DB_RANGE, DbRange
from .errors import (
    DegenerateHistogramError,
    NoBimodalRegionError,
    ParameterError,
)
from .grid import RasterGrid, Units, require_same_geometry, require_units
from .objects import Connectivity, DEFAULT_CONNECTIVITY, DEFAULT_MIN_PIXELS, binary_mask, filter_min_size

log = logging.getLogger(__name__)

DEFAULT_CELL_PX = 64
DEFAULT_BIMODALITY_MIN = 0.75
DEFAULT_BINS = 256
DEFAULT_FIXED_THRESHOLD_DB = -16.0
CLASS_FLOOR = 0.10  # each side of a kept cell's cut must hold >= 10% of its pixels


@dataclass(frozen=True)
class Histogram:
    """Counts over strictly increasing dB bin edges."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise ParameterError("histogram needs B+1 edges for B count bins")
        if not (np.diff(edges) > 0).all():
            raise ParameterError("histogram bin edges must be strictly increasing")
        if (counts < 0).any():
            raise ParameterError("histogram counts must be non-negative")

    @property
    def centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2.0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merged(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ParameterError("cannot merge histograms with different binnings")
        return Histogram(self.bin_edges, self.counts + other.counts)


def histogram(grid: RasterGrid, bins: int = DEFAULT_BINS,
              db_range: DbRange | None = None) -> Histogram:
    """Uniform-bin histogram of the valid dB values inside db_range."""
    require_units(grid, Units.DB)
    if bins < 2:
        raise ParameterError(f"need at least 2 bins, got {bins}")
    rng = db_range or DbRange(*DEFAULT_DB_RANGE)
    counts, edges = np.histogram(grid.valid_values(), bins=bins,
                                 range=(rng.min_db, rng.max_db))
    return Histogram(edges, counts)


@dataclass(frozen=True)
class OtsuResult:
    """Chosen threshold plus the variance split that justified it."""

    threshold: float
    between_class_variance: float
    total_variance: float
    bimodality: float


def otsu(hist: Histogram) -> OtsuResult:
    """Exhaustive Otsu scan over all bin cut points.

    Cut t separates bins [0, t) from [t, B); the returned threshold is
    the edge at the winning cut.  Both class populations must be
    non-empty for a cut to count.
    """
    w = hist.counts.astype(np.float64)
    if int(np.count_nonzero(w)) < 2:
        raise DegenerateHistogramError(
            "histogram mass concentrated in fewer than 2 bins; no threshold exists"
        )
    x = hist.centers
    cum_w = np.cumsum(w)
    cum_s = np.cumsum(w * x)
    total = cum_w[-1]
    total_sum = cum_s[-1]

    w0 = cum_w[:-1]
    s0 = cum_s[:-1]
    usable = (w0 > 0) & (total - w0 > 0)
    omega0 = w0 / total
    omega1 = 1.0 - omega0
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = s0 / w0
        mu1 = (total_sum - s0) / (total - w0)
        sigma_b = omega0 * omega1 * (mu0 - mu1) ** 2
    sigma_b = np.where(usable, sigma_b, -np.inf)

    best = int(np.argmax(sigma_b))
    mu = total_sum / total
    total_var = float(np.sum(w * (x - mu) ** 2) / total)
    between = float(sigma_b[best])
    bimodality = min(max(between / total_var, 0.0), 1.0)
    return OtsuResult(float(hist.bin_edges[best + 1]), between, total_var, bimodality)


def _class_balance_ok(hist: Histogram, threshold: float) -> bool:
    """Both classes of the cut must hold at least CLASS_FLOOR of the pixels."""
    cut = int(np.searchsorted(hist.bin_edges, threshold))
    low = int(hist.counts[:cut].sum())
    total = hist.total
    return low >= CLASS_FLOOR * total and (total - low) >= CLASS_FLOOR * total


def chessboard_otsu(grid: RasterGrid, cell_px: int = DEFAULT_CELL_PX,
                    bimodality_min: float = DEFAULT_BIMODALITY_MIN,
                    bins: int = DEFAULT_BINS,
                    db_range: DbRange | None = None) -> OtsuResult:
    """Otsu on the pooled histograms of locally bimodal chessboard cells.

    The scene is tiled into cell_px-square cells (edge cells may be
    smaller); a cell is kept when its own Otsu split shows bimodality >=
    bimodality_min with both classes above the 10% floor.  Kept cells'
    histograms share one binning, so pooling them is exact.
    """
    require_units(grid, Units.DB)
    if cell_px < 16:
        raise ParameterError(f"cell_px must be >= 16, got {cell_px}")
    if not 0 < bimodality_min < 1:
        raise ParameterError(f"bimodality_min must be in (0,1), got {bimodality_min}")

    rng = db_range or DbRange(*DEFAULT_DB_RANGE)
    kept = 0
    agg: Histogram | None = None
    for top in range(0, grid.height, cell_px):
        for left in range(0, grid.width, cell_px):
            cell = RasterGrid(
                grid.values[top : top + cell_px, left : left + cell_px],
                grid.valid[top : top + cell_px, left : left + cell_px],
                grid.transform, grid.crs_id, grid.units,
            )
            hist = histogram(cell, bins=bins, db_range=rng)
            try:
                res = otsu(hist)
            except DegenerateHistogramError:
                continue
            if res.bimodality < bimodality_min or not _class_balance_ok(hist, res.threshold):
                continue
            kept += 1
            agg = hist if agg is None else agg.merged(hist)

    if agg is None:
        raise NoBimodalRegionError(
            f"no {cell_px}px cell reached bimodality {bimodality_min} with balanced classes"
        )
    log.info("chessboard_otsu: pooled %d bimodal cells", kept)
    return otsu(agg)


def select_threshold(grid: RasterGrid, cell_px: int = DEFAULT_CELL_PX,
                     bimodality_min: float = DEFAULT_BIMODALITY_MIN,
                     bins: int = DEFAULT_BINS, db_range: DbRange | None = None,
                     fixed_db: float = DEFAULT_FIXED_THRESHOLD_DB):
    """Fallback chain: chessboard Otsu, then global Otsu, then fixed dB.

    Returns (threshold_db, method) with method in {chessboard, global, fixed}.
    """
    try:
        return chessboard_otsu(grid, cell_px, bimodality_min, bins, db_range).threshold, "chessboard"
    except NoBimodalRegionError:
        log.warning("no bimodal cells; falling back to global Otsu")
    try:
        return otsu(histogram(grid, bins=bins, db_range=db_range)).threshold, "global"
    except DegenerateHistogramError:
        log.warning("degenerate global histogram; falling back to fixed %.1f dB", fixed_db)
    return fixed_db, "fixed"


def water_mask(grid: RasterGrid, threshold: float,
               slope_masked: RasterGrid | None = None,
               min_pixels: int = DEFAULT_MIN_PIXELS,
               conn: Connectivity = DEFAULT_CONNECTIVITY) -> RasterGrid:
    """Binary water mask: dB backscatter below threshold, despeckled.

    Pixels invalidated by an optional slope-masked companion grid are
    dropped; specks smaller than min_pixels are zeroed.
    """
    require_units(grid, Units.DB)
    ok = grid.valid.copy()
    if slope_masked is not None:
        require_same_geometry(grid, slope_masked, "scene and slope mask")
        ok &= slope_masked.valid
    water = ok & (grid.values < threshold)
    mask = binary_mask(water.astype(np.float64), ok, grid)
    if min_pixels > 1:
        mask = filter_min_size(mask, conn=conn, min_pixels=min_pixels)
    return mask


@dataclass(frozen=True)
class FloodReport:
    """Pixel and km^2 tallies of permanent, during-event, and new water."""

    date_pre: str
    date_during: str
    px_permanent: int
    px_during: int
    px_flood: int
    pixel_area_m2: float

    CSV_FIELDS = ("date_pre", "date_during", "px_permanent", "px_during",
                  "px_flood", "km2_permanent", "km2_during", "km2_flood")

    def _km2(self, px: int) -> float:
        return px * self.pixel_area_m2 / 1e6

    @property
    def km2_permanent(self) -> float:
        return self._km2(self.px_permanent)

    @property
    def km2_during(self) -> float:
        return self._km2(self.px_during)

    @property
    def km2_flood(self) -> float:
        return self._km2(self.px_flood)

    def csv_row(self) -> dict:
        return {
            "date_pre": self.date_pre,
            "date_during": self.date_during,
            "px_permanent": self.px_permanent,
            "px_during": self.px_during,
            "px_flood": self.px_flood,
            "km2_permanent": f"{self.km2_permanent:.6f}",
            "km2_during": f"{self.km2_during:.6f}",
            "km2_flood": f"{self.km2_flood:.6f}",
        }


def flood_extent(pre_mask: RasterGrid, during_mask: RasterGrid,
                 pixel_area_m2: float, date_pre: str = "pre",
                 date_during: str = "during") -> tuple[FloodReport, RasterGrid]:
    """Difference two water masks into a flood report plus flood mask.

    All tallies run over the jointly valid domain, so
    px_flood = px_during - overlap(pre, during) holds exactly; the
    during-water count includes permanent water bodies.
    """
    require_same_geometry(pre_mask, during_mask, "pre and during masks")
    both = pre_mask.valid & during_mask.valid
    pre_w = both & (pre_mask.values == 1.0)
    during_w = both & (during_mask.values == 1.0)
    flood = during_w & ~pre_w

    report = FloodReport(
        date_pre=date_pre,
        date_during=date_during,
        px_permanent=int(pre_w.sum()),
        px_during=int(during_w.sum()),
        px_flood=int(flood.sum()),
        pixel_area_m2=float(pixel_area_m2),
    )
    return report, binary_mask(flood.astype(np.float64), both, pre_mask)
