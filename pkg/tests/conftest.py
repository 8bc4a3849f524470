"""Shared fixtures and grid-building helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from starcube import GeoTransform, RasterGrid, Units

UTM = "EPSG:32632"
T10 = GeoTransform(500000.0, 4650000.0, 10.0, -10.0)


def make_grid(values, valid=None, units=Units.LINEAR, transform=T10, crs=UTM):
    """RasterGrid around a 2D array; valid defaults to all-true."""
    values = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.ones(values.shape, dtype=bool)
    return RasterGrid(values, valid, transform, crs, units)


def speckled(rng, shape, truth=0.1, looks=4.0):
    """Stationary gamma-speckled intensity field with the given truth mean."""
    return truth * rng.gamma(looks, 1.0 / looks, size=shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cube_dir(tmp_path):
    return tmp_path / "cube"
