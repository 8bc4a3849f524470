"""Scene-to-flood-report pipeline over a cube.

Per scene the configured step chain runs in order (units are tracked on
the grids and validated up front); the per-window stacks are then aligned
and composited, the during composite is thresholded (chessboard Otsu with
global/fixed fallbacks), and the pre/during water masks are differenced
into a flood report.  Every intermediate raster is persisted under
``cube/derived/<run_id>/<step>/`` next to a JSON sidecar naming the step,
its parameters, and the sha256 of its inputs, so any product can be traced
back to bytes on disk.  Runs are deterministic: same cube + config + seed
means byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from . import calibration, speckle, terrain
from .config import Config
from .cube import Cube, SceneManifest
from .errors import ConfigError, DataError, NotFoundError, StarError
from .floodmap import FloodReport, flood_extent, select_threshold, water_mask
from .focal import pixel_area_m2, resample_to
from .grid import OrbitPass, Polarization, RasterGrid, StackLayer, TimeStack, Units
from .io import read_raster, write_raster
from .objects import smooth
from .temporal import align_stack, composite, composite_by_pass

log = logging.getLogger(__name__)

# Typical Sentinel-1 track headings by pass; the manifest schema carries
# no per-scene heading, so flattening uses these mid-latitude values.
PASS_HEADING_DEG = {OrbitPass.ASC: 349.0, OrbitPass.DESC: 191.0}

TERRAIN_STEPS = ("flatten", "slope_mask")

_STEP_PARAM_KEYS = {
    "mask_border_angle": ("angle_min_deg", "angle_max_deg"),
    "mask_extremes": ("db_min", "db_max"),
    "to_linear": (),
    "speckle": ("speckle.filter", "speckle.radius", "speckle.looks",
                "speckle.xi", "speckle.base_filter"),
    "flatten": ("terrain.model", "terrain.dem_path"),
    "slope_mask": ("terrain.max_slope_deg", "terrain.dem_path"),
    "to_db": (),
    "smooth": ("smooth.radius", "smooth.shape", "smooth.mode"),
}


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def parse_window(text: str, window_days: int) -> tuple[date, date]:
    """'start..end' or a single end date widened back by window_days."""
    if not text:
        raise ConfigError("missing date window; set window.pre and window.during")
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            start, end = date.fromisoformat(a.strip()), date.fromisoformat(b.strip())
        else:
            end = date.fromisoformat(text.strip())
            start = end - timedelta(days=window_days)
    except ValueError as exc:
        raise ConfigError(f"bad date window {text!r}: {exc}") from exc
    if start > end:
        raise ConfigError(f"window {text!r} starts after it ends")
    return start, end


@dataclass
class RunResult:
    run_id: str
    report: FloodReport
    threshold_db: float
    threshold_method: str
    out_dir: Path
    report_csv: Path
    flood_mask: Path


class _Writer:
    """Persists derived rasters plus provenance sidecars."""

    def __init__(self, out_root: Path):
        self.root = out_root

    def save(self, rel: str, grid: RasterGrid, step: str, params: dict,
             inputs: list, as_mask: bool = False) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_raster(path, grid, as_mask=as_mask)
        sidecar = {
            "step": step,
            "params": params,
            "inputs": {str(p): sha256_file(p) for p in inputs},
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _params_for(step: str, cfg: Config) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k in _STEP_PARAM_KEYS.get(step, ())
            for v in [cfg.get(k)]}


def _load_dem(cube: Cube, cfg: Config, template: RasterGrid) -> RasterGrid | None:
    rel = cfg.get("terrain.dem_path")
    if not rel:
        return None
    path = Path(rel)
    if not path.is_absolute():
        path = cube.root / path
    dem = read_raster(path, crs_id=template.crs_id, units=Units.METERS)
    if dem.units is not Units.METERS:
        dem = RasterGrid(dem.values, dem.valid, dem.transform, dem.crs_id, Units.METERS)
    if not dem.same_geometry(template):
        dem = resample_to(dem, template.transform, template.width, template.height,
                          crs_id=template.crs_id, method="bilinear")
        dem = RasterGrid(dem.values, dem.valid, dem.transform, dem.crs_id, Units.METERS)
    return dem


class _SceneRunner:
    """Applies the per-scene step chain, persisting every intermediate."""

    def __init__(self, cube: Cube, cfg: Config, writer: _Writer, steps: tuple):
        self.cube = cube
        self.cfg = cfg
        self.writer = writer
        self.steps = steps
        self.pol = cfg.get("pipeline.polarization")

    def band_path(self, scene: SceneManifest, band: str) -> Path:
        return self.cube.scene_dir(scene.scene_id) / scene.bands[band]

    def _angle(self, scene: SceneManifest) -> RasterGrid:
        if "angle" not in scene.bands:
            raise DataError(f"scene {scene.scene_id} has no angle band")
        return self.cube.load_band(scene, "angle")

    def _geometry(self, scene: SceneManifest, angle: RasterGrid) -> terrain.SarGeometry:
        return terrain.SarGeometry(angle, PASS_HEADING_DEG[scene.orbit_pass],
                                   scene.orbit_pass)

    def apply_step(self, step: str, grid: RasterGrid, scene: SceneManifest,
                   dem: RasterGrid | None) -> RasterGrid:
        cfg = self.cfg
        if step == "mask_border_angle":
            return calibration.mask_border_angle(grid, self._angle(scene), cfg.angle_range())
        if step == "mask_extremes":
            return calibration.mask_extremes(grid, cfg.db_range())
        if step == "to_linear":
            return calibration.to_linear(grid)
        if step == "speckle":
            name = cfg.get("speckle.filter")
            if name == "multitemporal":
                raise ConfigError("multitemporal filtering is stack-level; handled by caller")
            return speckle.FILTERS[name](grid, cfg.speckle_params())
        if step == "flatten":
            angle = self._angle(scene)
            return terrain.flatten(grid, dem, self._geometry(scene, angle),
                                   model=cfg.get("terrain.model"),
                                   meters_per_degree=cfg.get("area.meters_per_degree"))
        if step == "slope_mask":
            return terrain.slope_mask(grid, dem, cfg.get("terrain.max_slope_deg"),
                                      meters_per_degree=cfg.get("area.meters_per_degree"))
        if step == "to_db":
            return calibration.to_db(grid)
        if step == "smooth":
            return smooth(grid, cfg.smooth_kernel(), mode=cfg.get("smooth.mode"))
        raise ConfigError(f"unknown pipeline step {step!r}")

    def run(self, scene: SceneManifest, dem: RasterGrid | None):
        """Returns (final grid, pre-smooth grid) for one scene."""
        grid = self.cube.load_band(scene, self.pol)
        prev_path = self.band_path(scene, self.pol)
        presmooth = grid
        for step in self.steps:
            inputs = [prev_path]
            if step == "mask_border_angle":
                inputs.append(self.band_path(scene, "angle"))
            if step in TERRAIN_STEPS:
                inputs.append(self._dem_path())
            try:
                if step == "smooth":
                    presmooth = grid
                grid = self.apply_step(step, grid, scene, dem)
            except StarError as exc:
                raise type(exc)(f"step {step!r} on scene {scene.scene_id}: {exc}") from exc
            prev_path = self.writer.save(
                f"{step}/{scene.scene_id}.tif", grid, step,
                _params_for(step, self.cfg), inputs)
        if "smooth" not in self.steps:
            presmooth = grid
        return grid, presmooth, prev_path

    def _dem_path(self) -> Path:
        rel = self.cfg.get("terrain.dem_path")
        path = Path(rel)
        return path if path.is_absolute() else self.cube.root / path


def _effective_steps(cfg: Config) -> tuple[tuple, list]:
    """Resolve the step list against the terrain configuration."""
    steps = cfg.get("pipeline.steps")
    skipped = []
    if not cfg.get("terrain.dem_path"):
        wanted = [s for s in steps if s in TERRAIN_STEPS]
        if wanted and cfg.is_explicit("pipeline.steps"):
            raise ConfigError(
                f"steps {wanted} need terrain.dem_path; configure a DEM or drop them")
        for s in wanted:
            skipped.append({"step": s, "reason": "no DEM configured"})
        steps = tuple(s for s in steps if s not in TERRAIN_STEPS)
    return steps, skipped


def _select_scenes(cube: Cube, cfg: Config, window_key: str) -> list[SceneManifest]:
    start, end = parse_window(cfg.get(window_key), cfg.get("composite.window_days"))
    pol = cfg.get("pipeline.polarization")
    picked = [s for s in cube.scenes().values()
              if start <= s.timestamp.date() <= end and pol in s.bands]
    if not picked:
        raise DataError(f"no scenes with a {pol} band acquired in {window_key} "
                        f"{cfg.get(window_key)!r}")
    return sorted(picked, key=lambda s: (s.acquired, s.scene_id))


def _multitemporal_pass(runner: _SceneRunner, scenes: list, dem, cfg: Config,
                        writer: _Writer):
    """Stack-level Quegan filtering: pre-speckle steps, the stack filter,
    then the remaining steps, per scene."""
    steps = runner.steps
    if "speckle" not in steps:
        raise ConfigError("speckle.filter=multitemporal needs a 'speckle' step")
    at = steps.index("speckle")
    head, tail = steps[:at], steps[at + 1 :]

    partial = {}
    for scene in scenes:
        r = _SceneRunner(runner.cube, cfg, writer, head)
        grid, _, prev = r.run(scene, dem)
        partial[scene.scene_id] = (grid, prev)

    pol = Polarization(cfg.get("pipeline.polarization"))
    layers = [StackLayer(partial[s.scene_id][0], s.timestamp, s.orbit_pass,
                         s.relative_orbit, pol) for s in scenes]
    stack = TimeStack(sorted(layers, key=lambda l: l.timestamp))
    try:
        filtered = speckle.multitemporal(stack, cfg.get("speckle.base_filter"),
                                         cfg.speckle_params())
    except StarError as exc:
        raise type(exc)(f"step 'speckle' (multitemporal): {exc}") from exc

    order = sorted(scenes, key=lambda s: (s.timestamp, s.scene_id))
    results = {}
    stack_inputs = [partial[s.scene_id][1] for s in scenes]
    for scene, layer in zip(order, filtered.layers):
        prev = writer.save(f"speckle/{scene.scene_id}.tif", layer.grid, "speckle",
                           _params_for("speckle", cfg), stack_inputs)
        grid, presmooth = layer.grid, layer.grid
        r = _SceneRunner(runner.cube, cfg, writer, tail)
        for step in tail:
            try:
                if step == "smooth":
                    presmooth = grid
                grid = r.apply_step(step, grid, scene, dem)
            except StarError as exc:
                raise type(exc)(f"step {step!r} on scene {scene.scene_id}: {exc}") from exc
            prev = writer.save(f"{step}/{scene.scene_id}.tif", grid, step,
                               _params_for(step, cfg), [prev])
        if "smooth" not in tail:
            presmooth = grid
        results[scene.scene_id] = (grid, presmooth, prev)
    return results


def run_pipeline(cube: Cube, cfg: Config, seed: int | None = None) -> RunResult:
    """Execute the full chain and return the flood report."""
    run_id = cfg.get("run.id") or cfg.digest(seed)
    out_root = cube.derived_dir(run_id)
    out_root.mkdir(parents=True, exist_ok=True)
    writer = _Writer(out_root)

    steps, skipped = _effective_steps(cfg)
    windows = {"pre": _select_scenes(cube, cfg, "window.pre"),
               "during": _select_scenes(cube, cfg, "window.during")}

    all_scenes = {s.scene_id: s for w in windows.values() for s in w}
    ordered = [all_scenes[sid] for sid in sorted(all_scenes)]
    dem = None
    if any(s in TERRAIN_STEPS for s in steps):
        template = cube.load_band(ordered[0], cfg.get("pipeline.polarization"))
        dem = _load_dem(cube, cfg, template)

    runner = _SceneRunner(cube, cfg, writer, steps)
    if cfg.get("speckle.filter") == "multitemporal" and "speckle" in steps:
        results = _multitemporal_pass(runner, ordered, dem, cfg, writer)
    else:
        results = {s.scene_id: runner.run(s, dem) for s in ordered}

    pol = Polarization(cfg.get("pipeline.polarization"))
    composites = {}
    otsu_inputs = {}
    for name, scenes in windows.items():
        stat = cfg.get("composite.stat")

        def _composite_of(idx: int):
            layers = [StackLayer(results[s.scene_id][idx], s.timestamp, s.orbit_pass,
                                 s.relative_orbit, pol) for s in scenes]
            t = layers[0].grid
            stack = align_stack(layers, t.transform, t.width, t.height, t.crs_id)
            if cfg.get("composite.per_pass"):
                return composite_by_pass(stack, stat)
            return composite(stack, stat)

        comp = _composite_of(0)
        scene_files = [results[s.scene_id][2] for s in scenes]
        writer.save(f"composite/{name}.tif", comp, "composite",
                    {"stat": stat, "per_pass": cfg.get("composite.per_pass"),
                     "window": cfg.get(f"window.{name}")}, scene_files)
        composites[name] = comp
        otsu_inputs[name] = comp if cfg.get("threshold.use_smoothed") else _composite_of(1)

    try:
        threshold_db, method = select_threshold(
            otsu_inputs["during"],
            cell_px=cfg.get("threshold.cell_px"),
            bimodality_min=cfg.get("threshold.bimodality_min"),
            bins=cfg.get("threshold.bins"),
            db_range=cfg.db_range(),
            fixed_db=cfg.get("threshold.fixed_db"),
        )
    except StarError as exc:
        raise type(exc)(f"step 'threshold': {exc}") from exc
    log.info("threshold %.3f dB via %s", threshold_db, method)

    masks = {}
    for name in ("pre", "during"):
        mask = water_mask(composites[name], threshold_db,
                          min_pixels=cfg.get("objects.min_pixels"),
                          conn=cfg.connectivity())
        writer.save(f"water/{name}.tif", mask, "water_mask",
                    {"threshold_db": threshold_db, "method": method,
                     "min_pixels": cfg.get("objects.min_pixels"),
                     "connectivity": cfg.get("objects.connectivity")},
                    [out_root / f"composite/{name}.tif"], as_mask=True)
        masks[name] = mask

    area = pixel_area_m2(composites["pre"], cfg.get("area.meters_per_degree"))
    report, flood = flood_extent(masks["pre"], masks["during"], area,
                                 date_pre=cfg.get("window.pre"),
                                 date_during=cfg.get("window.during"))
    flood_path = writer.save("flood/flood.tif", flood, "flood_extent",
                             {"pixel_area_m2": area},
                             [out_root / "water/pre.tif", out_root / "water/during.tif"],
                             as_mask=True)

    report_dir = out_root / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    report_csv = report_dir / "report.csv"
    with open(report_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=FloodReport.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(report.csv_row())

    run_doc = {
        "run_id": run_id,
        "seed": seed,
        "config": cfg.canonical(),
        "steps": list(steps),
        "skipped_steps": skipped,
        "scenes": {w: [s.scene_id for s in scenes] for w, scenes in windows.items()},
        "threshold": {"db": threshold_db, "method": method},
        "report": report.csv_row(),
    }
    (out_root / "run.json").write_text(
        json.dumps(run_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    return RunResult(run_id, report, threshold_db, method, out_root,
                     report_csv, flood_path)


def load_report(cube: Cube, run_id: str) -> tuple[dict, list]:
    """Read a finished run's report row and its provenance table."""
    out_root = cube.derived_dir(run_id)
    run_json = out_root / "run.json"
    if not run_json.exists():
        raise NotFoundError(f"no run {run_id!r} in cube (missing {run_json})")
    doc = json.loads(run_json.read_text(encoding="utf-8"))
    rows = []
    for sidecar in sorted(out_root.rglob("*.json")):
        if sidecar.name == "run.json":
            continue
        entry = json.loads(sidecar.read_text(encoding="utf-8"))
        if "step" in entry:
            artifact = sidecar.with_suffix("")  # strip .json, keep .tif
            rows.append({"artifact": str(artifact.relative_to(out_root)),
                         "step": entry["step"],
                         "n_inputs": len(entry.get("inputs", {}))})
    return doc, rows
