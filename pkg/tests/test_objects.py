"""Binary-mask morphology: smoothing, components, size filtering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from starcube import (
    Connectivity,
    Kernel,
    ParameterError,
    Units,
    connected_pixel_count,
    filter_min_size,
    smooth,
)
from starcube.objects import binary_mask, require_binary

import oracles
from conftest import make_grid


def random_mask(rng, shape=(16, 16), p=0.45):
    fg = (rng.random(shape) < p).astype(np.float64)
    return make_grid(fg, units=Units.DIMENSIONLESS)


class TestBinaryGuard:
    def test_nonbinary_rejected(self):
        g = make_grid(np.array([[0.0, 0.5]]), units=Units.DIMENSIONLESS)
        with pytest.raises(ParameterError):
            require_binary(g)

    def test_binary_accepted(self):
        g = make_grid(np.array([[0.0, 1.0]]), units=Units.DIMENSIONLESS)
        require_binary(g)


class TestSmooth:
    def test_mean_mode_is_convolution(self, rng):
        vals = rng.uniform(0.01, 1.0, size=(9, 9))
        g = make_grid(vals)
        k = Kernel.square(1)
        out = smooth(g, k, mode="mean")
        from starcube.focal import convolve
        ref = convolve(g, k)
        assert np.array_equal(out.values, ref.values)

    def test_median_is_lower_median(self, rng):
        vals = rng.uniform(0.0, 1.0, size=(8, 8))
        valid = rng.random((8, 8)) > 0.2
        g = make_grid(vals, valid=valid)
        out = smooth(g, Kernel.square(1), mode="median")
        for r in range(8):
            for c in range(8):
                window = []
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < 8 and 0 <= cc < 8 and valid[rr, cc]:
                            window.append(vals[rr, cc])
                if valid[r, c] and window:
                    assert out.valid[r, c]
                    assert out.values[r, c] == sorted(window)[(len(window) - 1) // 2]
                else:
                    assert not out.valid[r, c]

    def test_median_respects_circle_footprint(self, rng):
        vals = rng.uniform(0.0, 1.0, size=(7, 7))
        g = make_grid(vals)
        out = smooth(g, Kernel.circle(1), mode="median")
        window = [vals[3, 3], vals[2, 3], vals[4, 3], vals[3, 2], vals[3, 4]]
        assert out.values[3, 3] == sorted(window)[2]

    def test_unknown_mode(self):
        g = make_grid(np.ones((4, 4)))
        with pytest.raises(ParameterError):
            smooth(g, Kernel.square(1), mode="mode")


class TestConnectedComponents:
    @pytest.mark.parametrize("conn,eight", [(Connectivity.FOUR, False),
                                            (Connectivity.EIGHT, True)])
    def test_counts_match_flood_fill(self, rng, conn, eight):
        g = random_mask(rng)
        counts = connected_pixel_count(g, conn=conn, max_count=10_000)
        fg = g.values == 1.0
        ref = oracles.flood_fill_sizes(fg, eight)
        assert np.array_equal(counts.values, ref.astype(np.float64))

    def test_diagonal_bridge(self):
        fg = np.zeros((4, 4))
        fg[0, 0] = fg[1, 1] = 1.0
        g = make_grid(fg, units=Units.DIMENSIONLESS)
        four = connected_pixel_count(g, conn=Connectivity.FOUR)
        eight = connected_pixel_count(g, conn=Connectivity.EIGHT)
        assert four.values[0, 0] == 1.0
        assert eight.values[0, 0] == 2.0

    def test_saturates_at_max_count(self, rng):
        fg = np.ones((8, 8))
        g = make_grid(fg, units=Units.DIMENSIONLESS)
        counts = connected_pixel_count(g, max_count=10)
        assert np.all(counts.values == 10.0)

    def test_invalid_pixels_count_zero(self):
        fg = np.ones((3, 3))
        valid = np.ones((3, 3), bool)
        valid[1, 1] = False
        g = make_grid(fg, valid=valid, units=Units.DIMENSIONLESS)
        counts = connected_pixel_count(g)
        assert counts.values[1, 1] == 0.0
        assert counts.values[0, 0] == 8.0

    def test_max_count_validation(self, rng):
        with pytest.raises(ParameterError):
            connected_pixel_count(random_mask(rng), max_count=0)


class TestFilterMinSize:
    def test_small_specks_removed(self):
        fg = np.zeros((8, 8))
        fg[0, 0] = 1.0  # single speck
        fg[4:6, 4:7] = 1.0  # 6-pixel blob
        g = make_grid(fg, units=Units.DIMENSIONLESS)
        out = filter_min_size(g, min_pixels=4)
        assert out.values[0, 0] == 0.0
        assert np.all(out.values[4:6, 4:7] == 1.0)

    def test_idempotent(self, rng):
        g = random_mask(rng)
        once = filter_min_size(g, min_pixels=5)
        twice = filter_min_size(once, min_pixels=5)
        assert np.array_equal(once.values, twice.values)

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_min_pixels(self, min_px, seed):
        rng = np.random.default_rng(seed)
        g = random_mask(rng, shape=(12, 12))
        small = filter_min_size(g, min_pixels=min_px)
        large = filter_min_size(g, min_pixels=min_px + 3)
        assert not np.any((large.values == 1.0) & (small.values == 0.0))

    def test_min_one_is_identity(self, rng):
        g = random_mask(rng)
        out = filter_min_size(g, min_pixels=1)
        assert np.array_equal(out.values, g.values)

    def test_validation(self, rng):
        with pytest.raises(ParameterError):
            filter_min_size(random_mask(rng), min_pixels=0)


class TestBinaryMaskHelper:
    def test_wraps_template_geometry(self, rng):
        template = make_grid(np.zeros((5, 5)))
        fg = (rng.random((5, 5)) < 0.5).astype(np.float64)
        ok = rng.random((5, 5)) > 0.2
        out = binary_mask(fg, ok, template)
        assert out.same_geometry(template)
        assert out.units is Units.DIMENSIONLESS
        assert np.array_equal(out.valid, ok)


@given(hnp.arrays(bool, (10, 10)))
@settings(max_examples=60, deadline=None)
def test_eight_connectivity_dominates_four(fg):
    """Components only merge when diagonals join: 8-conn counts >= 4-conn."""
    g = make_grid(fg.astype(np.float64), units=Units.DIMENSIONLESS)
    four = connected_pixel_count(g, conn=Connectivity.FOUR, max_count=10_000)
    eight = connected_pixel_count(g, conn=Connectivity.EIGHT, max_count=10_000)
    assert np.all(eight.values >= four.values)
