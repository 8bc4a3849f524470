"""Command-line interface: ingest, synth, run, report, inspect.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
algorithm condition (e.g. no bimodal region anywhere in the scene).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import sys

from .config import Config
from .cube import Cube
from .errors import ConfigError, StarError
from .floodmap import FloodReport
from .io import read_raster
from .pipeline import load_report, run_pipeline
from .synth import synth_flood_pair

log = logging.getLogger(__name__)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cube", default="cube", metavar="DIR",
                        help="cube directory (default: ./cube)")
    common.add_argument("--config", metavar="FILE",
                        help="flat key=value config file")
    common.add_argument("--seed", type=int, default=0, metavar="N",
                        help="random seed for synthesis / run provenance")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads (reserved; execution is single-threaded)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="star",
        description="Sentinel-1 style preprocessing and Otsu flood mapping "
                    "over a local analysis-ready data cube.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="bring one raster band into the cube")
    p.add_argument("raster", help="GeoTIFF or .sgrd file")
    p.add_argument("--scene-id", required=True)
    p.add_argument("--band", required=True, choices=("VV", "VH", "angle"))
    p.add_argument("--acquired", required=True, help="ISO date or date-time")
    p.add_argument("--orbit-pass", required=True, choices=("ASC", "DESC"))
    p.add_argument("--relative-orbit", required=True, type=int)
    p.add_argument("--looks", type=float, default=4.4)
    p.add_argument("--width", type=int, help="expected raster width (validated)")
    p.add_argument("--height", type=int, help="expected raster height (validated)")
    p.add_argument("--crs", help="CRS id, e.g. EPSG:32632 (required for .sgrd)")

    sub.add_parser("synth", parents=[common],
                   help="write a seeded synthetic pre/during flood scene pair")

    sub.add_parser("run", parents=[common],
                   help="run the full pipeline and report flood extent")

    p = sub.add_parser("report", parents=[common],
                       help="print a finished run's flood CSV and provenance")
    p.add_argument("run_id")

    p = sub.add_parser("inspect", parents=[common],
                       help="describe a raster file")
    p.add_argument("raster")
    return parser


def _load_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config.default()
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    if args.threads > 1:
        log.info("--threads %d requested; running single-threaded", args.threads)
    return cfg


def _print_report_csv(row: dict):
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FloodReport.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    sys.stdout.write(buf.getvalue())


def _cmd_ingest(args) -> int:
    _load_config(args)
    cube = Cube.create(args.cube)
    metadata = {
        "scene_id": args.scene_id,
        "band": args.band,
        "acquired": args.acquired,
        "orbit_pass": args.orbit_pass,
        "relative_orbit": args.relative_orbit,
        "looks": args.looks,
    }
    if args.width is not None:
        metadata["width"] = args.width
    if args.height is not None:
        metadata["height"] = args.height
    if args.crs:
        metadata["crs_id"] = args.crs
    scene = cube.ingest(args.raster, metadata)
    print(f"ingested {args.band} of scene {scene.scene_id} into {cube.root}")
    return 0


def _cmd_synth(args) -> int:
    cfg = _load_config(args)
    cube = Cube.create(args.cube)
    pre, during = synth_flood_pair(cube, cfg, args.seed)
    for scene in (pre, during):
        print(f"wrote scene {scene.scene_id} (acquired {scene.acquired}) "
              f"to {cube.scene_dir(scene.scene_id)}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    cube = Cube.open(args.cube)
    result = run_pipeline(cube, cfg, seed=args.seed)
    print(f"run {result.run_id}: threshold {result.threshold_db:.3f} dB "
          f"({result.threshold_method}), artifacts in {result.out_dir}")
    _print_report_csv(result.report.csv_row())
    return 0


def _cmd_report(args) -> int:
    _load_config(args)
    cube = Cube.open(args.cube)
    doc, rows = load_report(cube, args.run_id)
    _print_report_csv(doc["report"])
    print()
    print(f"{'artifact':40s} {'step':18s} inputs")
    for row in rows:
        print(f"{row['artifact']:40s} {row['step']:18s} {row['n_inputs']}")
    return 0


def _cmd_inspect(args) -> int:
    _load_config(args)
    grid = read_raster(args.raster)
    t = grid.transform
    print(f"path:      {args.raster}")
    print(f"size:      {grid.width} x {grid.height} pixels")
    print(f"crs:       {grid.crs_id}")
    print(f"units:     {grid.units.value}")
    print(f"transform: origin=({t.origin_x}, {t.origin_y}) "
          f"pixel=({t.pixel_w}, {t.pixel_h})")
    n_valid = int(grid.valid.sum())
    pct = 100.0 * n_valid / grid.values.size if grid.values.size else 0.0
    print(f"valid:     {n_valid} px ({pct:.2f}%)")
    if n_valid:
        vals = grid.valid_values()
        print(f"range:     [{vals.min():.6g}, {vals.max():.6g}] mean {vals.mean():.6g}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "run": _cmd_run,
    "report": _cmd_report,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
