"""Flat dotted-key run configuration.

A config file is a plain-text `key = value` document (or a single JSON
object); values are JSON literals where that parses and bare strings
otherwise.  Every key must be registered below — unknown keys are
configuration errors, which catches typos before a long run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import AngleRange, DbRange
from .errors import ConfigError
from .grid import Kernel, KernelShape, Units
from .objects import Connectivity
from .speckle import FILTERS, SpeckleParams

PIPELINE_STEPS = ("mask_border_angle", "mask_extremes", "to_linear", "speckle",
                  "flatten", "slope_mask", "to_db", "smooth")

# (required input units or None for any, output units or None for unchanged)
_STEP_UNITS = {
    "mask_border_angle": (None, None),
    "mask_extremes": (Units.DB, None),
    "to_linear": (Units.DB, Units.LINEAR),
    "speckle": (Units.LINEAR, None),
    "flatten": (Units.LINEAR, None),
    "slope_mask": (None, None),
    "to_db": (Units.LINEAR, Units.DB),
    "smooth": (None, None),
}


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise ValueError(f"expected true/false, got {v!r}")


def _float(v):
    return float(v)


def _int(v):
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"expected integer, got {v!r}")
    return int(v)


def _str(v):
    return str(v)


def _choice(*options):
    def parse(v):
        s = str(v)
        if s not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return s
    return parse


def _pair_or_none(v):
    if v is None or v == "":
        return None
    if isinstance(v, (int, float)):
        return (float(v), float(v))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return (float(v[0]), float(v[1]))
    raise ValueError(f"expected a number or [x, y] pair, got {v!r}")


def _steps(v):
    if isinstance(v, str):
        v = [s.strip() for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)):
        raise ValueError(f"expected a step list, got {v!r}")
    return tuple(str(s) for s in v)


# key -> (default, parser)
KNOWN_KEYS = {
    "angle_min_deg": (31.0, _float),
    "angle_max_deg": (46.0, _float),
    "db_min": (-30.0, _float),
    "db_max": (15.0, _float),
    "area.meters_per_degree": (None, _pair_or_none),
    "speckle.filter": ("refined_lee", _choice(*FILTERS, "multitemporal")),
    "speckle.radius": (2, _int),
    "speckle.looks": (4.4, _float),
    "speckle.xi": (0.9, _float),
    "speckle.base_filter": ("lee", _choice(*FILTERS)),
    "terrain.model": ("direct", _choice("direct", "volume")),
    "terrain.max_slope_deg": (15.0, _float),
    "terrain.dem_path": ("", _str),
    "objects.connectivity": ("eight", _choice("four", "eight")),
    "objects.min_pixels": (8, _int),
    "smooth.radius": (1, _int),
    "smooth.shape": ("square", _choice("square", "circle")),
    "smooth.mode": ("mean", _choice("mean", "median")),
    "composite.stat": ("median", _choice("mean", "median", "min", "max")),
    "composite.window_days": (12, _int),
    "composite.per_pass": (True, _bool),
    "threshold.cell_px": (64, _int),
    "threshold.bimodality_min": (0.75, _float),
    "threshold.bins": (256, _int),
    "threshold.fixed_db": (-16.0, _float),
    "threshold.use_smoothed": (True, _bool),
    "pipeline.steps": (PIPELINE_STEPS, _steps),
    "pipeline.polarization": ("VV", _choice("VV", "VH")),
    "window.pre": ("", _str),
    "window.during": ("", _str),
    "run.id": ("", _str),
    "synth.size": (512, _int),
    "synth.pixel_m": (10.0, _float),
    "synth.land_db": (-8.0, _float),
    "synth.water_db": (-22.0, _float),
    "synth.looks": (4.0, _float),
    "synth.angle_deg": (38.0, _float),
    "synth.border_ramp": (False, _bool),
    "synth.point_targets": (0, _int),
    "synth.slope_plane": (False, _bool),
}


def _parse_text(text: str) -> dict:
    """key = value lines; # comments; values are JSON literals or bare strings."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("JSON config must be a single flat object")
        return doc
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            out[key.strip()] = json.loads(value)
        except ValueError:
            out[key.strip()] = value
    return out


@dataclass
class Config:
    """Validated flat configuration with typed accessors."""

    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    @classmethod
    def from_dict(cls, overrides: dict) -> "Config":
        values = {k: default for k, (default, _) in KNOWN_KEYS.items()}
        explicit = set()
        for key, raw in overrides.items():
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            _, parser = KNOWN_KEYS[key]
            try:
                values[key] = parser(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from exc
            explicit.add(key)
        cfg = cls(values, explicit)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls.from_dict(_parse_text(text))

    @classmethod
    def default(cls) -> "Config":
        return cls.from_dict({})

    def get(self, key: str):
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def is_explicit(self, key: str) -> bool:
        return key in self.explicit

    def validate(self):
        """Check cross-key invariants, mainly pipeline step ordering."""
        steps = self.get("pipeline.steps")
        unknown = [s for s in steps if s not in _STEP_UNITS]
        if unknown:
            raise ConfigError(f"unknown pipeline steps {unknown}; supported: {PIPELINE_STEPS}")
        if len(set(steps)) != len(steps):
            raise ConfigError(f"pipeline steps contain duplicates: {steps}")
        units = Units.DB  # scenes are stored in dB
        for step in steps:
            need, out = _STEP_UNITS[step]
            if need is not None and units is not need:
                raise ConfigError(
                    f"pipeline step {step!r} needs {need.value} input but would "
                    f"receive {units.value}; reorder the unit conversions"
                )
            if out is not None:
                units = out
        if not 0 < self.get("threshold.bimodality_min") < 1:
            raise ConfigError("threshold.bimodality_min must be in (0,1)")
        if self.get("threshold.cell_px") < 16:
            raise ConfigError("threshold.cell_px must be >= 16")
        if self.get("composite.window_days") < 0:
            raise ConfigError("composite.window_days must be >= 0")

    # Typed accessors -----------------------------------------------------

    def angle_range(self) -> AngleRange:
        return AngleRange(self.get("angle_min_deg"), self.get("angle_max_deg"))

    def db_range(self) -> DbRange:
        return DbRange(self.get("db_min"), self.get("db_max"))

    def speckle_params(self) -> SpeckleParams:
        return SpeckleParams(looks=self.get("speckle.looks"),
                             radius=self.get("speckle.radius"),
                             sigma_xi=self.get("speckle.xi"))

    def smooth_kernel(self) -> Kernel:
        radius = self.get("smooth.radius")
        if self.get("smooth.shape") == KernelShape.CIRCLE.value:
            return Kernel.circle(radius)
        return Kernel.square(radius)

    def connectivity(self) -> Connectivity:
        return Connectivity(self.get("objects.connectivity"))

    def canonical(self) -> dict:
        """JSON-ready view of every key, for hashing and provenance."""
        out = {}
        for key in sorted(KNOWN_KEYS):
            v = self.values[key]
            if isinstance(v, tuple):
                v = list(v)
            out[key] = v
        return out

    def digest(self, seed: int | None = None) -> str:
        """Stable short id of this configuration (plus optional seed)."""
        doc = {"config": self.canonical(), "seed": seed}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]
