"""End-to-end pipeline tests on small synthetic cubes."""

import json
from datetime import date

import numpy as np
import pytest

from starcube.config import Config
from starcube.cube import Cube
from starcube.errors import ConfigError, DataError, NotFoundError
from starcube.grid import Units
from starcube.io import read_raster
from starcube.pipeline import (
    _effective_steps,
    load_report,
    parse_window,
    run_pipeline,
    sha256_file,
)
from starcube.synth import DURING_SCENE_ID, flood_pair_masks, synth_flood_pair

PRE_WINDOW = "2024-04-25..2024-05-05"
DURING_WINDOW = "2024-05-28..2024-06-05"


def flood_cfg(size=128, **over):
    d = {
        "synth.size": size,
        "synth.looks": 4.0,
        "speckle.looks": 4.0,
        "window.pre": PRE_WINDOW,
        "window.during": DURING_WINDOW,
    }
    d.update(over)
    return Config.from_dict(d)


def make_flood_cube(tmp_path, cfg, seed=7):
    cube = Cube.create(tmp_path / "cube")
    synth_flood_pair(cube, cfg, seed)
    return cube


def flood_pixels(result) -> np.ndarray:
    grid = read_raster(result.flood_mask, units=Units.DIMENSIONLESS)
    return grid.values.astype(bool) & grid.valid


def iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return inter / union if union else 1.0


class TestParseWindow:
    def test_range_form(self):
        assert parse_window("2024-04-25..2024-05-05", 12) == (
            date(2024, 4, 25), date(2024, 5, 5))

    def test_single_date_widens_backwards(self):
        assert parse_window("2024-05-05", 12) == (date(2024, 4, 23), date(2024, 5, 5))

    def test_zero_window_days(self):
        assert parse_window("2024-05-05", 0) == (date(2024, 5, 5), date(2024, 5, 5))

    def test_reversed_range_rejected(self):
        with pytest.raises(ConfigError):
            parse_window("2024-05-05..2024-04-25", 12)

    def test_empty_rejected(self):
        with pytest.raises(ConfigError, match="missing date window"):
            parse_window("", 12)

    def test_garbage_rejected(self):
        with pytest.raises(ConfigError):
            parse_window("not-a-date", 12)


class TestEffectiveSteps:
    def test_default_steps_skip_terrain_without_dem(self):
        steps, skipped = _effective_steps(Config.default())
        assert "flatten" not in steps and "slope_mask" not in steps
        assert {s["step"] for s in skipped} == {"flatten", "slope_mask"}
        assert all(s["reason"] for s in skipped)

    def test_explicit_terrain_without_dem_is_an_error(self):
        cfg = Config.from_dict({"pipeline.steps": "to_linear,flatten,to_db"})
        with pytest.raises(ConfigError, match="terrain.dem_path"):
            _effective_steps(cfg)

    def test_dem_configured_keeps_terrain_steps(self):
        cfg = Config.from_dict({"terrain.dem_path": "dem.tif"})
        steps, skipped = _effective_steps(cfg)
        assert "flatten" in steps and "slope_mask" in steps
        assert skipped == []


class TestRunPipeline:
    def test_flood_lobe_recovered(self, tmp_path):
        cfg = flood_cfg()
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        _, lobe = flood_pair_masks(128, 128)
        assert iou(flood_pixels(result), lobe) > 0.9
        assert result.threshold_method == "chessboard"
        assert -25.0 < result.threshold_db < -10.0

    def test_report_is_consistent_with_rasters(self, tmp_path):
        cfg = flood_cfg()
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        n_flood = int(flood_pixels(result).sum())
        assert result.report.px_flood == n_flood
        # 10 m pixels -> km2 = px * 1e-4
        assert result.report.km2_flood == pytest.approx(n_flood * 1e-4)
        assert result.report.px_during >= result.report.px_flood

    def test_report_csv_written(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        lines = result.report_csv.read_text().splitlines()
        assert lines[0] == ("date_pre,date_during,px_permanent,px_during,"
                            "px_flood,km2_permanent,km2_during,km2_flood")
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[0] == PRE_WINDOW and row[1] == DURING_WINDOW
        assert int(row[4]) == result.report.px_flood

    def test_every_artifact_has_provenance(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        tifs = sorted(result.out_dir.rglob("*.tif"))
        assert tifs, "expected derived rasters"
        for tif in tifs:
            sidecar = tif.with_suffix(".tif.json")
            assert sidecar.exists(), f"missing sidecar for {tif}"
            doc = json.loads(sidecar.read_text())
            assert doc["step"]
            assert isinstance(doc["params"], dict)
            for path, digest in doc["inputs"].items():
                assert sha256_file(path) == digest

    def test_run_json_schema(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=5)
        doc = json.loads((result.out_dir / "run.json").read_text())
        assert doc["run_id"] == result.run_id
        assert doc["seed"] == 5
        assert doc["scenes"] == {"pre": ["synth-pre"], "during": ["synth-during"]}
        assert doc["threshold"]["method"] == result.threshold_method
        assert {s["step"] for s in doc["skipped_steps"]} == {"flatten", "slope_mask"}
        assert "flatten" not in doc["steps"]
        assert doc["config"]["threshold.cell_px"] == 64

    def test_same_inputs_byte_identical_outputs(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube_a = make_flood_cube(tmp_path / "a", cfg, seed=9)
        cube_b = make_flood_cube(tmp_path / "b", cfg, seed=9)
        res_a = run_pipeline(cube_a, cfg, seed=9)
        res_b = run_pipeline(cube_b, cfg, seed=9)
        rel_a = sorted(p.relative_to(res_a.out_dir) for p in res_a.out_dir.rglob("*.tif"))
        rel_b = sorted(p.relative_to(res_b.out_dir) for p in res_b.out_dir.rglob("*.tif"))
        assert rel_a == rel_b
        for rel in rel_a:
            assert (res_a.out_dir / rel).read_bytes() == (res_b.out_dir / rel).read_bytes()
        assert res_a.report_csv.read_bytes() == res_b.report_csv.read_bytes()

    def test_run_id_override(self, tmp_path):
        cfg = flood_cfg(size=96, **{"run.id": "demo-1"})
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        assert result.run_id == "demo-1"
        assert result.out_dir == cube.derived_dir("demo-1")

    def test_empty_window_is_a_data_error(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        bad = flood_cfg(size=96, **{"window.during": "2025-01-01..2025-01-31"})
        with pytest.raises(DataError, match="window.during"):
            run_pipeline(cube, bad, seed=7)

    def test_missing_window_is_a_config_error(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        with pytest.raises(ConfigError):
            run_pipeline(cube, Config.default(), seed=7)

    def test_otsu_on_presmooth_composite(self, tmp_path):
        cfg = flood_cfg(**{"threshold.use_smoothed": False})
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        assert result.threshold_method in ("chessboard", "global")
        assert result.report.px_flood > 0

    def test_multitemporal_filter_path(self, tmp_path):
        cfg = flood_cfg(**{"speckle.filter": "multitemporal",
                           "speckle.base_filter": "lee"})
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        _, lobe = flood_pair_masks(128, 128)
        assert iou(flood_pixels(result), lobe) > 0.85
        # the stack filter consumed both scenes' pre-speckle rasters
        sidecar = json.loads(
            (result.out_dir / f"speckle/{DURING_SCENE_ID}.tif.json").read_text())
        assert len(sidecar["inputs"]) == 2

    def test_terrain_steps_run_when_dem_present(self, tmp_path):
        cfg = flood_cfg(**{"synth.slope_plane": True, "terrain.dem_path": "dem.tif"})
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        doc = json.loads((result.out_dir / "run.json").read_text())
        assert "flatten" in doc["steps"] and "slope_mask" in doc["steps"]
        assert doc["skipped_steps"] == []
        assert (result.out_dir / "flatten/synth-pre.tif").exists()
        _, lobe = flood_pair_masks(128, 128)
        assert iou(flood_pixels(result), lobe) > 0.85


class TestLoadReport:
    def test_round_trip(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        result = run_pipeline(cube, cfg, seed=7)
        doc, rows = load_report(cube, result.run_id)
        assert doc["report"]["px_flood"] == result.report.px_flood
        steps = {r["step"] for r in rows}
        assert {"speckle", "composite", "water_mask", "flood_extent"} <= steps
        artifacts = {r["artifact"] for r in rows}
        assert "flood/flood.tif" in artifacts

    def test_unknown_run_id(self, tmp_path):
        cfg = flood_cfg(size=96)
        cube = make_flood_cube(tmp_path, cfg)
        with pytest.raises(NotFoundError):
            load_report(cube, "no-such-run")
