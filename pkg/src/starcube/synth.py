"""Synthetic speckled flood scenes with known ground truth.

Scenes are built from a two-class dB truth (land / water polygon), pushed
to linear power, multiplied by Gamma(L, 1/L) speckle (unit mean), and
stored back in dB — so every downstream estimate can be scored against
the planted geometry.  The same seed always yields byte-identical scenes.

The flood pair shares one permanent-water river (region A); the during
scene adds a disjoint flood lobe (region B) next to it, so the true flood
extent is exactly B.
"""

from __future__ import annotations

import numpy as np

from .config import Config
from .cube import Cube, SceneManifest
from .errors import ParameterError
from .grid import GeoTransform, OrbitPass, RasterGrid, Units
from .io import write_raster
from . import terrain

SYNTH_CRS = "EPSG:32632"
SYNTH_ORIGIN = (500000.0, 4650000.0)
PRE_ACQUIRED = "2024-05-01T05:30:00"
DURING_ACQUIRED = "2024-06-01T05:30:00"
PRE_SCENE_ID = "synth-pre"
DURING_SCENE_ID = "synth-during"
DEM_FILE = "dem.tif"
POINT_TARGET_BOOST_DB = 15.0


def flood_pair_masks(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Permanent river band A and disjoint flood lobe B as boolean masks."""
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]

    center = 0.55 * height + 0.05 * height * np.sin(2 * np.pi * cols / width * 1.7 + 0.6)
    river = np.abs(rows - center) <= 0.06 * height

    cy, cx = 0.28 * height, 0.35 * width
    ry, rx = 0.15 * height, 0.28 * width
    lobe = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
    lobe &= ~river  # keep the regions disjoint even if parameters drift
    return river, lobe


def _transform(pixel_m: float) -> GeoTransform:
    ox, oy = SYNTH_ORIGIN
    return GeoTransform(ox, oy, pixel_m, -pixel_m)


def synth_scene(water: np.ndarray, cfg: Config, rng: np.random.Generator,
                point_rc: np.ndarray | None = None,
                dem: RasterGrid | None = None) -> dict:
    """One speckled scene over a water mask; returns band grids + truth."""
    height, width = water.shape
    t = _transform(cfg.get("synth.pixel_m"))
    looks = cfg.get("synth.looks")
    if looks <= 0:
        raise ParameterError(f"synth.looks must be positive, got {looks}")

    truth_db = np.where(water, cfg.get("synth.water_db"), cfg.get("synth.land_db"))
    truth_linear = 10.0 ** (truth_db / 10.0)
    if point_rc is not None and len(point_rc):
        boost = 10.0 ** (POINT_TARGET_BOOST_DB / 10.0)
        truth_linear[point_rc[:, 0], point_rc[:, 1]] *= boost

    angle_vals = np.full((height, width), cfg.get("synth.angle_deg"))
    if cfg.get("synth.border_ramp"):
        ramp_w = max(1, int(0.08 * width))
        ramp = np.linspace(26.0, cfg.get("synth.angle_deg"), ramp_w)
        angle_vals[:, :ramp_w] = ramp
        angle_vals[:, width - ramp_w :] = ramp[::-1]
    angle = RasterGrid(angle_vals, np.ones_like(water, dtype=bool), t, SYNTH_CRS, Units.DEGREES)

    if dem is not None:
        # Imprint the slope modulation the direct model will later undo.
        geom = terrain.SarGeometry(angle, heading_deg=349.0, orbit_pass=OrbitPass.ASC)
        lia = terrain.local_incidence(dem, geom)
        cos_ratio = np.cos(np.radians(lia.values)) / np.cos(np.radians(angle_vals))
        truth_linear = np.where(lia.valid & (cos_ratio > 0),
                                truth_linear / np.maximum(cos_ratio, 1e-6), truth_linear)

    speckle = rng.gamma(shape=looks, scale=1.0 / looks, size=(height, width))
    observed = truth_linear * speckle
    ok = observed > 0
    vv_db = np.where(ok, 10.0 * np.log10(np.where(ok, observed, 1.0)), 0.0)

    return {
        "VV": RasterGrid(vv_db, ok, t, SYNTH_CRS, Units.DB),
        "angle": angle,
        "truth": RasterGrid(water.astype(np.float64), np.ones_like(water, dtype=bool),
                            t, SYNTH_CRS, Units.DIMENSIONLESS),
    }


def synth_dem(cfg: Config) -> RasterGrid:
    """Inclined-plane DEM rising eastward at 8 degrees."""
    size = cfg.get("synth.size")
    pixel_m = cfg.get("synth.pixel_m")
    t = _transform(pixel_m)
    x_m = (np.arange(size)[None, :] + 0.5) * pixel_m
    z = np.broadcast_to(np.tan(np.radians(8.0)) * x_m, (size, size)).copy()
    return RasterGrid(z, np.ones((size, size), dtype=bool), t, SYNTH_CRS, Units.METERS)


def synth_flood_pair(cube: Cube, cfg: Config, seed: int) -> tuple[SceneManifest, SceneManifest]:
    """Write the seeded pre/during scene pair (and optional DEM) into a cube."""
    size = cfg.get("synth.size")
    if size < 64:
        raise ParameterError(f"synth.size must be >= 64, got {size}")
    river, lobe = flood_pair_masks(size, size)
    rng = np.random.default_rng(seed)

    n_points = cfg.get("synth.point_targets")
    point_rc = None
    if n_points:
        land_rc = np.argwhere(~(river | lobe))
        picks = rng.choice(len(land_rc), size=min(n_points, len(land_rc)), replace=False)
        point_rc = land_rc[picks]

    dem = None
    if cfg.get("synth.slope_plane"):
        dem = synth_dem(cfg)
        write_raster(cube.root / DEM_FILE, dem)

    manifests = []
    for scene_id, acquired, water in (
        (PRE_SCENE_ID, PRE_ACQUIRED, river),
        (DURING_SCENE_ID, DURING_ACQUIRED, river | lobe),
    ):
        grids = synth_scene(water, cfg, rng, point_rc=point_rc, dem=dem)
        scene = SceneManifest(
            scene_id=scene_id,
            acquired=acquired,
            orbit_pass=OrbitPass.ASC,
            relative_orbit=44,
            bands={"VV": "VV.tif", "angle": "angle.tif"},
            crs_id=SYNTH_CRS,
            transform=grids["VV"].transform,
            looks=cfg.get("synth.looks"),
        )
        cube.add_scene(scene, {"VV": grids["VV"], "angle": grids["angle"]},
                       truth=grids["truth"])
        manifests.append(scene)
    return manifests[0], manifests[1]
