"""Slope/aspect, local incidence and radiometric flattening."""

import math

import numpy as np
import pytest

from starcube import (
    GeoTransform,
    OrbitPass,
    ParameterError,
    RasterGrid,
    Units,
    UnitsError,
)
from starcube.terrain import (
    SarGeometry,
    flatten,
    layover_shadow,
    local_incidence,
    slope_aspect,
    slope_mask,
)

import oracles
from conftest import T10, make_grid

LOOK_AZ_ASC = 79.0  # heading 349 + 90


def plane_dem(shape, slope_deg, facing_deg, transform=T10):
    """Linear DEM whose downslope aspect is facing_deg at slope_deg."""
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w]
    x = (cols + 0.5) * transform.pixel_w
    y = (rows + 0.5) * transform.pixel_h
    rise = math.radians((facing_deg + 180.0) % 360.0)  # gradient ascends opposite
    z = math.tan(math.radians(slope_deg)) * (x * math.sin(rise) + y * math.cos(rise))
    return make_grid(z, units=Units.METERS, transform=transform)


def geometry(shape, incidence_deg=40.0, heading=349.0, orbit=OrbitPass.ASC):
    angle = make_grid(np.full(shape, incidence_deg), units=Units.DEGREES)
    return SarGeometry(angle, heading, orbit)


class TestSlopeAspect:
    def test_east_rising_plane(self):
        """z = 0.1x rises to the east, so the surface faces west (270)."""
        dem = plane_dem((12, 12), math.degrees(math.atan(0.1)), 270.0)
        slope, aspect = slope_aspect(dem)
        inner = np.s_[1:-1, 1:-1]
        assert np.allclose(slope.values[inner], math.degrees(math.atan(0.1)), atol=1e-6)
        assert np.allclose(aspect.values[inner], 270.0, atol=1e-6)

    def test_north_rising_plane_faces_south(self):
        dem = plane_dem((10, 10), 11.3, 180.0)
        slope, aspect = slope_aspect(dem)
        inner = np.s_[1:-1, 1:-1]
        assert np.allclose(slope.values[inner], 11.3, atol=1e-6)
        assert np.allclose(aspect.values[inner], 180.0, atol=1e-6)

    def test_flat_dem_zero_slope_zero_aspect(self):
        dem = make_grid(np.full((8, 8), 137.0), units=Units.METERS)
        slope, aspect = slope_aspect(dem)
        assert np.all(slope.values[slope.valid] == 0.0)
        assert np.all(aspect.values[aspect.valid] == 0.0)

    def test_corners_lack_neighbors(self):
        dem = make_grid(np.zeros((6, 6)), units=Units.METERS)
        slope, _ = slope_aspect(dem)
        assert not slope.valid[0, 0] and not slope.valid[-1, -1]
        assert slope.valid[0, 1] and slope.valid[3, 3]

    def test_matches_scalar_horn_oracle(self, rng):
        z = rng.uniform(0, 60, size=(10, 11))
        valid = rng.random((10, 11)) > 0.15
        dem = make_grid(z, valid=valid, units=Units.METERS)
        slope, aspect = slope_aspect(dem)
        for r in range(10):
            for c in range(11):
                ref = oracles.horn_point(z, valid, r, c, 10.0, -10.0)
                if ref is None:
                    assert not slope.valid[r, c]
                else:
                    assert slope.valid[r, c]
                    assert slope.values[r, c] == pytest.approx(ref[0], abs=1e-9)
                    assert aspect.values[r, c] == pytest.approx(ref[1], abs=1e-9)

    def test_geographic_crs_needs_scale(self):
        t = GeoTransform(9.0, 45.0, 1e-4, -1e-4)
        dem = make_grid(np.zeros((6, 6)), units=Units.METERS, transform=t, crs="EPSG:4326")
        with pytest.raises(ParameterError):
            slope_aspect(dem)

    def test_geographic_scale_applied(self, rng):
        z = rng.uniform(0, 30, size=(8, 8))
        t = GeoTransform(9.0, 45.0, 1e-4, -1e-4)
        dem = make_grid(z, units=Units.METERS, transform=t, crs="EPSG:4326")
        slope, aspect = slope_aspect(dem, meters_per_degree=(100000.0, 110000.0))
        ref = oracles.horn_point(z, np.ones((8, 8), bool), 4, 4, 10.0, -11.0)
        assert slope.values[4, 4] == pytest.approx(ref[0], abs=1e-9)
        assert aspect.values[4, 4] == pytest.approx(ref[1], abs=1e-9)


class TestSarGeometry:
    def test_look_azimuth_right_looking(self):
        g = geometry((4, 4), heading=349.0)
        assert g.look_azimuth_deg == pytest.approx(79.0)
        d = geometry((4, 4), heading=191.0, orbit=OrbitPass.DESC)
        assert d.look_azimuth_deg == pytest.approx(281.0)

    def test_incidence_units_enforced(self):
        bad = make_grid(np.full((4, 4), 40.0), units=Units.LINEAR)
        with pytest.raises(UnitsError):
            SarGeometry(bad, 349.0, OrbitPass.ASC)


class TestLocalIncidence:
    def test_flat_dem_equals_ellipsoid_angle(self):
        dem = make_grid(np.full((10, 10), 80.0), units=Units.METERS)
        lia = local_incidence(dem, geometry((10, 10), 38.5))
        assert np.allclose(lia.values[lia.valid], 38.5, atol=1e-9)

    def test_slope_facing_radar_reduces_angle(self):
        """10 deg slope facing the sensor: local incidence 40 - 10 = 30."""
        dem = plane_dem((12, 12), 10.0, (LOOK_AZ_ASC + 180.0) % 360.0)
        lia = local_incidence(dem, geometry((12, 12), 40.0))
        inner = np.s_[2:-2, 2:-2]
        assert np.allclose(lia.values[inner], 30.0, atol=1e-6)

    def test_requires_geometry(self):
        dem = make_grid(np.zeros((8, 8)), units=Units.METERS)
        with pytest.raises(ParameterError):
            local_incidence(dem, None)


class TestLayoverShadow:
    def test_steep_facing_slope_lays_over(self):
        """Range-plane tilt 50 deg toward the sensor exceeds 35 deg incidence."""
        dem = plane_dem((12, 12), 50.0, (LOOK_AZ_ASC + 180.0) % 360.0)
        layover, shadow = layover_shadow(dem, geometry((12, 12), 35.0))
        inner = np.s_[2:-2, 2:-2]
        assert layover[inner].all()
        assert not shadow.any()

    def test_steep_back_slope_is_shadow(self):
        """60 deg slope facing away: local incidence 95 deg, no illumination."""
        dem = plane_dem((12, 12), 60.0, LOOK_AZ_ASC)
        layover, shadow = layover_shadow(dem, geometry((12, 12), 35.0))
        inner = np.s_[2:-2, 2:-2]
        assert shadow[inner].all()
        assert not layover[inner].any()

    def test_flat_ground_has_neither(self):
        dem = make_grid(np.zeros((8, 8)), units=Units.METERS)
        layover, shadow = layover_shadow(dem, geometry((8, 8)))
        assert not layover.any() and not shadow.any()


class TestFlatten:
    def test_flat_dem_identity_bitwise(self, rng):
        vals = rng.uniform(0.01, 1.0, size=(16, 16))
        g = make_grid(vals.copy())
        dem = make_grid(np.full((16, 16), 210.0), units=Units.METERS)
        for model in ("direct", "volume"):
            out = flatten(g, dem, geometry((16, 16)), model=model)
            assert np.array_equal(out.values[out.valid], vals[out.valid])
            # only the four corners lose slope support
            assert int((~out.valid).sum()) == 4

    def test_direct_factor_matches_cos_ratio(self):
        """10 deg slope toward a 40 deg beam: factor cos(30)/cos(40)."""
        dem = plane_dem((14, 14), 10.0, (LOOK_AZ_ASC + 180.0) % 360.0)
        g = make_grid(np.ones((14, 14)))
        out = flatten(g, dem, geometry((14, 14), 40.0), model="direct")
        expect = math.cos(math.radians(30.0)) / math.cos(math.radians(40.0))
        inner = np.s_[2:-2, 2:-2]
        assert np.allclose(out.values[inner], expect, atol=1e-9)

    def test_volume_factor_matches_tangent_ratio(self):
        dem = plane_dem((14, 14), 10.0, (LOOK_AZ_ASC + 180.0) % 360.0)
        g = make_grid(np.ones((14, 14)))
        out = flatten(g, dem, geometry((14, 14), 40.0), model="volume")
        _, volume, _, _ = oracles.flatten_factors(10.0, 259.0, 40.0, LOOK_AZ_ASC)
        inner = np.s_[2:-2, 2:-2]
        assert np.allclose(out.values[inner], volume, atol=1e-9)
        assert volume == pytest.approx(
            math.tan(math.radians(50.0)) / math.tan(math.radians(60.0)), abs=1e-12)

    def test_layover_and_shadow_invalid(self):
        dem = plane_dem((12, 12), 50.0, (LOOK_AZ_ASC + 180.0) % 360.0)
        g = make_grid(np.ones((12, 12)))
        out = flatten(g, dem, geometry((12, 12), 35.0))
        assert not out.valid[2:-2, 2:-2].any()

    def test_unknown_model(self):
        dem = make_grid(np.zeros((8, 8)), units=Units.METERS)
        g = make_grid(np.ones((8, 8)))
        with pytest.raises(ParameterError):
            flatten(g, dem, geometry((8, 8)), model="cosine")

    def test_requires_linear_units(self):
        dem = make_grid(np.zeros((8, 8)), units=Units.METERS)
        g = make_grid(np.full((8, 8), -10.0), units=Units.DB)
        with pytest.raises(UnitsError):
            flatten(g, dem, geometry((8, 8)))


class TestSlopeMask:
    def test_threshold_behavior(self):
        dem = plane_dem((12, 12), 10.0, 270.0)
        g = make_grid(np.ones((12, 12)))
        kept = slope_mask(g, dem, max_slope_deg=15.0)
        dropped = slope_mask(g, dem, max_slope_deg=5.0)
        inner = np.s_[1:-1, 1:-1]
        assert kept.valid[inner].all()
        assert not dropped.valid[inner].any()

    def test_kept_values_bit_exact(self, rng):
        vals = rng.uniform(0.01, 1.0, size=(10, 10))
        dem = plane_dem((10, 10), 10.0, 270.0)
        g = make_grid(vals.copy())
        out = slope_mask(g, dem, max_slope_deg=15.0)
        assert np.array_equal(out.values[out.valid], vals[out.valid])

    def test_monotone_in_threshold(self, rng):
        z = rng.uniform(0, 40, size=(12, 12))
        dem = make_grid(z, units=Units.METERS)
        g = make_grid(np.ones((12, 12)))
        masks = [slope_mask(g, dem, max_slope_deg=d).valid for d in (5.0, 15.0, 45.0)]
        assert not np.any(masks[0] & ~masks[1])
        assert not np.any(masks[1] & ~masks[2])

    def test_nonpositive_threshold_rejected(self):
        dem = make_grid(np.zeros((8, 8)), units=Units.METERS)
        g = make_grid(np.ones((8, 8)))
        with pytest.raises(ParameterError):
            slope_mask(g, dem, max_slope_deg=0.0)
