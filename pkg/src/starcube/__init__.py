"""starcube: Sentinel-1 style GRD preprocessing and Otsu flood mapping
over local analysis-ready data cubes.

The library mirrors the classic GRD-to-flood-map chain — border/extreme
masking, speckle filtering, radiometric terrain flattening, temporal
compositing, chessboard-Otsu thresholding, and flood-extent differencing —
as pure functions over in-memory grids, with a small CLI (`star`) that
runs the whole pipeline against an on-disk cube.
"""

from .calibration import (
    AngleRange,
    DbRange,
    mask_border_angle,
    mask_extremes,
    to_db,
    to_linear,
)
from .config import Config
from .cube import Cube, SceneManifest
from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    DegenerateError,
    DegenerateHistogramError,
    IngestError,
    NoBimodalRegionError,
    NotFoundError,
    ParameterError,
    ProjectionError,
    StarError,
    UnitsError,
)
from .floodmap import (
    FloodReport,
    Histogram,
    OtsuResult,
    chessboard_otsu,
    flood_extent,
    histogram,
    otsu,
    select_threshold,
    water_mask,
)
from .focal import convolve, focal_stats, pixel_area_m2, resample_to
from .grid import (
    GeoTransform,
    Kernel,
    KernelShape,
    OrbitPass,
    Polarization,
    RasterGrid,
    StackLayer,
    TimeStack,
    Units,
)
from .io import read_raster, write_raster
from .objects import (
    Connectivity,
    connected_pixel_count,
    filter_min_size,
    smooth,
)
from .pipeline import RunResult, run_pipeline
from .speckle import (
    SpeckleParams,
    boxcar,
    gamma_map,
    lee,
    lee_sigma,
    multitemporal,
    refined_lee,
)
from .synth import synth_flood_pair
from .temporal import align_stack, band_combine, composite, composite_by_pass
from .terrain import (
    SarGeometry,
    flatten,
    local_incidence,
    slope_aspect,
    slope_mask,
)

__version__ = "0.1.0"
