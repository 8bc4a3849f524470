"""Analysis-ready data cube: on-disk layout, manifests, scene ingestion.

Layout (all JSON UTF-8, deterministic key order):

    cube/manifest.json                  {"scenes": {scene_id: entry}}
    cube/scenes/<id>/VV.tif             dB backscatter (float32, nodata -9999)
    cube/scenes/<id>/VH.tif             optional second polarization
    cube/scenes/<id>/angle.tif          ellipsoid incidence angle (degrees)
    cube/scenes/<id>/meta.json          same fields as the manifest entry
    cube/derived/<run>/<step>/...       pipeline products + provenance sidecars

No database, no hidden state: a cube is diff-able with standard tools.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .errors import IngestError, NotFoundError
from .grid import GeoTransform, OrbitPass, RasterGrid, Units
from .io import read_raster, write_raster

log = logging.getLogger(__name__)

BAND_NAMES = ("VV", "VH", "angle")
BAND_UNITS = {"VV": Units.DB, "VH": Units.DB, "angle": Units.DEGREES}
TRUTH_FILE = "truth_water.tif"


@dataclass(frozen=True)
class SceneManifest:
    """One acquisition: metadata plus band file names inside the scene dir."""

    scene_id: str
    acquired: str
    orbit_pass: OrbitPass
    relative_orbit: int
    bands: dict
    crs_id: str
    transform: GeoTransform
    looks: float = 4.4

    def __post_init__(self):
        if not ("VV" in self.bands or "VH" in self.bands):
            raise IngestError(f"scene {self.scene_id}: needs at least one of VV/VH bands")
        bad = [b for b in self.bands if b not in BAND_NAMES]
        if bad:
            raise IngestError(f"scene {self.scene_id}: unknown bands {bad}")
        datetime.fromisoformat(self.acquired)  # validates the timestamp format

    @property
    def timestamp(self) -> datetime:
        return datetime.fromisoformat(self.acquired)

    def to_dict(self) -> dict:
        t = self.transform
        return {
            "scene_id": self.scene_id,
            "acquired": self.acquired,
            "orbit_pass": self.orbit_pass.value,
            "relative_orbit": self.relative_orbit,
            "bands": dict(sorted(self.bands.items())),
            "crs_id": self.crs_id,
            "transform": [t.origin_x, t.origin_y, t.pixel_w, t.pixel_h],
            "looks": self.looks,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneManifest":
        try:
            return cls(
                scene_id=doc["scene_id"],
                acquired=doc["acquired"],
                orbit_pass=OrbitPass(doc["orbit_pass"]),
                relative_orbit=int(doc["relative_orbit"]),
                bands=dict(doc["bands"]),
                crs_id=doc["crs_id"],
                transform=GeoTransform(*doc["transform"]),
                looks=float(doc.get("looks", 4.4)),
            )
        except KeyError as exc:
            raise IngestError(f"scene manifest missing field {exc.args[0]!r}") from exc


def _write_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Cube:
    """Handle on one cube directory (one AOI, single writer)."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @classmethod
    def create(cls, root) -> "Cube":
        cube = cls(root)
        (cube.root / "scenes").mkdir(parents=True, exist_ok=True)
        (cube.root / "derived").mkdir(parents=True, exist_ok=True)
        if not cube.manifest_path.exists():
            _write_json(cube.manifest_path, {"scenes": {}})
        return cube

    @classmethod
    def open(cls, root) -> "Cube":
        cube = cls(root)
        if not cube.manifest_path.exists():
            raise NotFoundError(f"no cube at {root} (missing manifest.json)")
        return cube

    def scene_dir(self, scene_id: str) -> Path:
        return self.root / "scenes" / scene_id

    def derived_dir(self, run_id: str) -> Path:
        return self.root / "derived" / run_id

    # Manifest ------------------------------------------------------------

    def scenes(self) -> dict:
        doc = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {sid: SceneManifest.from_dict(entry)
                for sid, entry in sorted(doc.get("scenes", {}).items())}

    def _update_manifest(self, scene: SceneManifest):
        doc = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        doc.setdefault("scenes", {})[scene.scene_id] = scene.to_dict()
        doc["scenes"] = dict(sorted(doc["scenes"].items()))
        _write_json(self.manifest_path, doc)

    # Scene I/O -----------------------------------------------------------

    def add_scene(self, scene: SceneManifest, grids: dict,
                  truth: RasterGrid | None = None) -> SceneManifest:
        """Write band rasters + meta.json and register the scene."""
        if scene.scene_id in json.loads(self.manifest_path.read_text())["scenes"]:
            log.warning("re-ingesting scene %s: overwriting", scene.scene_id)
        sdir = self.scene_dir(scene.scene_id)
        sdir.mkdir(parents=True, exist_ok=True)
        for band, grid in grids.items():
            if band not in scene.bands:
                raise IngestError(f"scene {scene.scene_id}: band {band} not in manifest bands")
            write_raster(sdir / scene.bands[band], grid)
        if truth is not None:
            write_raster(sdir / TRUTH_FILE, truth, as_mask=True)
        _write_json(sdir / "meta.json", scene.to_dict())
        self._update_manifest(scene)
        return scene

    def ingest(self, path, metadata: dict) -> SceneManifest:
        """Bring an external raster into the cube as one band of a scene.

        metadata must give scene_id, acquired, orbit_pass, relative_orbit,
        band; optional width/height/crs_id are validated against the file.
        """
        band = metadata.get("band")
        if band not in BAND_NAMES:
            raise IngestError(f"metadata field 'band' must be one of {BAND_NAMES}, got {band!r}")
        grid = read_raster(path, crs_id=metadata.get("crs_id", "LOCAL"),
                           units=BAND_UNITS[band])
        for dim in ("width", "height"):
            declared = metadata.get(dim)
            if declared is not None and int(declared) != getattr(grid, dim):
                raise IngestError(
                    f"{path}: declared {dim}={declared} but raster has {dim}={getattr(grid, dim)}"
                )
        if grid.crs_id == "LOCAL" and not metadata.get("crs_id"):
            raise IngestError(f"{path}: missing field 'crs_id' (file carries no CRS)")

        missing = [f for f in ("scene_id", "acquired", "orbit_pass", "relative_orbit")
                   if f not in metadata]
        if missing:
            raise IngestError(f"metadata missing fields {missing}")

        existing = self.scenes().get(metadata["scene_id"])
        bands = dict(existing.bands) if existing else {}
        bands[band] = f"{band}.tif"
        scene = SceneManifest(
            scene_id=metadata["scene_id"],
            acquired=metadata["acquired"],
            orbit_pass=OrbitPass(metadata["orbit_pass"]),
            relative_orbit=int(metadata["relative_orbit"]),
            bands=bands,
            crs_id=grid.crs_id if grid.crs_id != "LOCAL" else metadata["crs_id"],
            transform=grid.transform,
            looks=float(metadata.get("looks", 4.4)),
        )
        return self.add_scene(scene, {band: grid})

    def load_band(self, scene: SceneManifest, band: str) -> RasterGrid:
        if band not in scene.bands:
            raise NotFoundError(f"scene {scene.scene_id} has no {band} band")
        path = self.scene_dir(scene.scene_id) / scene.bands[band]
        if not path.exists():
            raise IngestError(f"scene {scene.scene_id}: band file {path} is missing")
        grid = read_raster(path, crs_id=scene.crs_id, units=BAND_UNITS[band])
        if grid.crs_id == "LOCAL":
            grid = RasterGrid(grid.values, grid.valid, grid.transform,
                              scene.crs_id, grid.units)
        return grid

    def truth_mask(self, scene: SceneManifest) -> RasterGrid | None:
        path = self.scene_dir(scene.scene_id) / TRUTH_FILE
        return read_raster(path) if path.exists() else None
