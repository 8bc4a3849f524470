"""Config parsing, validation and digests."""

import pytest

from starcube import Config, ConfigError, Connectivity, KernelShape
from starcube.config import KNOWN_KEYS, PIPELINE_STEPS, _parse_text


class TestParsing:
    def test_key_value_lines_with_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# flood run\n"
            "speckle.filter = lee   # fast\n"
            "speckle.looks = 4.0\n"
            "threshold.cell_px = 128\n"
            "composite.per_pass = false\n"
            "\n"
            "window.pre = 2024-04-25..2024-05-05\n"
        )
        cfg = Config.load(path)
        assert cfg.get("speckle.filter") == "lee"
        assert cfg.get("speckle.looks") == 4.0
        assert cfg.get("threshold.cell_px") == 128
        assert cfg.get("composite.per_pass") is False
        assert cfg.get("window.pre") == "2024-04-25..2024-05-05"

    def test_json_object_form(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"speckle.filter": "boxcar", "objects.min_pixels": 4}')
        cfg = Config.load(path)
        assert cfg.get("speckle.filter") == "boxcar"
        assert cfg.get("objects.min_pixels") == 4

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError):
            _parse_text("speckle.filter lee")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            Config.load(tmp_path / "none.cfg")


class TestValidation:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            Config.from_dict({"speckle.radios": 2})

    def test_bad_value_type_rejected(self):
        with pytest.raises(ConfigError):
            Config.from_dict({"speckle.looks": "many"})
        with pytest.raises(ConfigError):
            Config.from_dict({"objects.min_pixels": 2.5})

    def test_choice_keys_rejected_outside_options(self):
        with pytest.raises(ConfigError):
            Config.from_dict({"speckle.filter": "wiener"})
        with pytest.raises(ConfigError):
            Config.from_dict({"pipeline.polarization": "HH"})

    def test_step_units_order_enforced(self):
        """speckle works on linear power: running it on dB is refused."""
        with pytest.raises(ConfigError, match="speckle"):
            Config.from_dict({"pipeline.steps": "mask_extremes,speckle,to_linear"})

    def test_duplicate_steps_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            Config.from_dict({"pipeline.steps": "to_linear,to_db,to_linear"})

    def test_unknown_step_rejected(self):
        with pytest.raises(ConfigError, match="unknown pipeline steps"):
            Config.from_dict({"pipeline.steps": "to_linear,sharpen"})

    def test_threshold_bounds(self):
        with pytest.raises(ConfigError):
            Config.from_dict({"threshold.bimodality_min": 1.5})
        with pytest.raises(ConfigError):
            Config.from_dict({"threshold.cell_px": 8})

    def test_default_step_list_is_valid(self):
        cfg = Config.default()
        assert cfg.get("pipeline.steps") == PIPELINE_STEPS

    def test_step_subset_keeps_unit_discipline(self):
        cfg = Config.from_dict({"pipeline.steps": "mask_extremes,to_linear,speckle,to_db"})
        assert cfg.get("pipeline.steps")[-1] == "to_db"


class TestAccessors:
    def test_defaults(self):
        cfg = Config.default()
        assert cfg.angle_range().min_deg == 31.0
        assert cfg.angle_range().max_deg == 46.0
        assert cfg.db_range().min_db == -30.0
        assert cfg.speckle_params().looks == 4.4
        assert cfg.connectivity() is Connectivity.EIGHT
        assert cfg.smooth_kernel().shape is KernelShape.SQUARE

    def test_explicit_tracking(self):
        cfg = Config.from_dict({"speckle.looks": 5.0})
        assert cfg.is_explicit("speckle.looks")
        assert not cfg.is_explicit("speckle.radius")

    def test_circle_kernel(self):
        cfg = Config.from_dict({"smooth.shape": "circle", "smooth.radius": 2})
        k = cfg.smooth_kernel()
        assert k.shape is KernelShape.CIRCLE
        assert k.radius == 2

    def test_get_unknown_key(self):
        with pytest.raises(ConfigError):
            Config.default().get("nope")


class TestDigest:
    def test_stable_across_instances(self):
        a = Config.from_dict({"speckle.looks": 4.0})
        b = Config.from_dict({"speckle.looks": 4.0})
        assert a.digest(7) == b.digest(7)

    def test_sensitive_to_values_and_seed(self):
        base = Config.default()
        assert base.digest(7) != base.digest(8)
        assert base.digest(7) != Config.from_dict({"speckle.looks": 4.0}).digest(7)

    def test_short_hex(self):
        d = Config.default().digest(0)
        assert len(d) == 12
        int(d, 16)

    def test_canonical_covers_every_key(self):
        doc = Config.default().canonical()
        assert sorted(doc) == sorted(KNOWN_KEYS)
        assert doc["pipeline.steps"] == list(PIPELINE_STEPS)
