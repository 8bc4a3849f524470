"""Raster file I/O: single-band GeoTIFF plus a raw `.sgrd` fallback.

GeoTIFFs are written with tifffile: float32 with nodata -9999 for
measurement rasters, uint8 with nodata 255 for {0,1} masks.  Georeferencing
uses the ModelPixelScale/ModelTiepoint tags and a minimal GeoKey directory;
grid units and CRS id also travel in a JSON ImageDescription so our own
reader loses nothing.  The `.sgrd` format is a little-endian header
(magic "SGRD", u32 width, u32 height, f64 x4 transform) followed by
row-major float32 samples, for environments without a TIFF stack.
All writers are byte-deterministic: no timestamps, no software tags.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import tifffile

from .errors import DataError, IngestError, ParameterError
from .grid import GeoTransform, RasterGrid, Units

NODATA_FLOAT = -9999.0
NODATA_BYTE = 255
SGRD_MAGIC = b"SGRD"
_SGRD_HEADER = struct.Struct("<4sII4d")

# GeoTIFF tag ids
_PIXEL_SCALE = 33550
_TIEPOINT = 33922
_GEO_KEYS = 34735
_GDAL_NODATA = 42113
_GEOGRAPHIC_EPSG = {4326, 4258, 4269}


def _epsg_code(crs_id: str) -> int | None:
    if crs_id.upper().startswith("EPSG:"):
        try:
            return int(crs_id.split(":", 1)[1])
        except ValueError:
            return None
    return None


def _geokey_directory(crs_id: str) -> tuple[int, ...]:
    code = _epsg_code(crs_id)
    geographic = code in _GEOGRAPHIC_EPSG or crs_id.upper() == "CRS:84"
    keys = [(1024, 0, 1, 2 if geographic else 1), (1025, 0, 1, 1)]
    if code is not None:
        keys.append((2048 if geographic else 3072, 0, 1, code))
    flat = [1, 1, 0, len(keys)]
    for k in keys:
        flat.extend(k)
    return tuple(flat)


def write_geotiff(path, grid: RasterGrid, as_mask: bool = False):
    """Write a single-band GeoTIFF; byte-for-byte reproducible."""
    t = grid.transform
    if as_mask:
        data = np.where(grid.valid, grid.values, NODATA_BYTE).astype(np.uint8)
        nodata = str(NODATA_BYTE)
    else:
        data = np.where(grid.valid, grid.values, NODATA_FLOAT).astype(np.float32)
        nodata = str(NODATA_FLOAT)

    description = json.dumps(
        {"crs_id": grid.crs_id, "units": grid.units.value},
        sort_keys=True, separators=(",", ":"),
    )
    geokeys = _geokey_directory(grid.crs_id)
    extratags = [
        (_PIXEL_SCALE, "d", 3, (t.pixel_w, -t.pixel_h, 0.0), True),
        (_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0), True),
        (_GEO_KEYS, "H", len(geokeys), geokeys, True),
        (_GDAL_NODATA, "s", 0, nodata, True),
    ]
    tifffile.imwrite(
        path, data,
        photometric="minisblack",
        extratags=extratags,
        description=description,
        software=False,
    )


def read_geotiff(path) -> RasterGrid:
    """Read a single-band GeoTIFF written by write_geotiff (or compatible)."""
    with tifffile.TiffFile(path) as tif:
        page = tif.pages[0]
        data = page.asarray()
        tags = page.tags

        def tag(code, default=None):
            entry = tags.get(code)
            return entry.value if entry is not None else default

        scale = tag(_PIXEL_SCALE)
        tie = tag(_TIEPOINT)
        if scale is None or tie is None:
            raise DataError(f"{path}: missing GeoTIFF georeferencing tags")
        if any(abs(v) > 1e-12 for v in tie[:3]):
            raise DataError(f"{path}: only (0,0) tiepoints are supported")
        transform = GeoTransform(float(tie[3]), float(tie[4]),
                                 float(scale[0]), -float(scale[1]))

        crs_id, units = "LOCAL", Units.DIMENSIONLESS
        desc = tag(270, "")
        if desc:
            try:
                meta = json.loads(desc)
                crs_id = meta.get("crs_id", crs_id)
                units = Units(meta.get("units", units.value))
            except (ValueError, KeyError):
                pass

        nodata_txt = tag(_GDAL_NODATA)
        nodata = float(nodata_txt) if nodata_txt is not None else (
            NODATA_BYTE if data.dtype == np.uint8 else NODATA_FLOAT)

    values = data.astype(np.float64)
    valid = values != nodata
    values = np.where(valid, values, 0.0)
    return RasterGrid(values, valid, transform, crs_id, units)


def write_sgrd(path, grid: RasterGrid):
    """Raw fallback raster: 44-byte header then row-major float32."""
    t = grid.transform
    header = _SGRD_HEADER.pack(SGRD_MAGIC, grid.width, grid.height,
                               t.origin_x, t.origin_y, t.pixel_w, t.pixel_h)
    data = np.where(grid.valid, grid.values, NODATA_FLOAT).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_sgrd(path, crs_id: str = "LOCAL", units: Units = Units.DIMENSIONLESS) -> RasterGrid:
    """Read a raw .sgrd raster; CRS and units are caller-supplied."""
    raw = Path(path).read_bytes()
    if len(raw) < _SGRD_HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, width, height, ox, oy, pw, ph = _SGRD_HEADER.unpack_from(raw)
    if magic != SGRD_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {SGRD_MAGIC!r}")
    expected = _SGRD_HEADER.size + 4 * width * height
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes for {width}x{height}, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_SGRD_HEADER.size).reshape(height, width)
    values = data.astype(np.float64)
    valid = values != NODATA_FLOAT
    values = np.where(valid, values, 0.0)
    return RasterGrid(values, valid, GeoTransform(ox, oy, pw, ph), crs_id, units)


def write_raster(path, grid: RasterGrid, as_mask: bool = False):
    """Write by extension: .tif/.tiff GeoTIFF, .sgrd raw."""
    suffix = Path(path).suffix.lower()
    if suffix in (".tif", ".tiff"):
        write_geotiff(path, grid, as_mask=as_mask)
    elif suffix == ".sgrd":
        write_sgrd(path, grid)
    else:
        raise ParameterError(f"unsupported raster extension {suffix!r} for {path}")


def read_raster(path, crs_id: str = "LOCAL", units: Units = Units.DIMENSIONLESS) -> RasterGrid:
    """Read by extension; crs_id/units apply only to the raw format."""
    p = Path(path)
    if not p.exists():
        raise IngestError(f"raster not found: {path}")
    suffix = p.suffix.lower()
    if suffix in (".tif", ".tiff"):
        return read_geotiff(path)
    if suffix == ".sgrd":
        return read_sgrd(path, crs_id=crs_id, units=units)
    raise ParameterError(f"unsupported raster extension {suffix!r} for {path}")
