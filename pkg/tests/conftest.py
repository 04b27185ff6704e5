import numpy as np
import pytest

from ccdaq.detector import DetectorGeometry, ExposureParams, SceneModel, Source


@pytest.fixture
def geom():
    """Small single-node detector: noiseless defaults keep oracles exact."""
    return DetectorGeometry(
        name="test-64",
        rows=64,
        cols=64,
        full_well=200000,
        dark_current=0.0,
        output_nodes=1,
        bias_level=(500,),
        read_noise=(0.0, 5.0),
        pixel_time=(1e-7, 1e-7),
        gains=(1.0, 2.0),
    )


@pytest.fixture
def flat_scene():
    return SceneModel(sky_level=10.0)


def make_geom(**kw):
    base = dict(
        name="t",
        rows=64,
        cols=64,
        full_well=200000,
        dark_current=0.0,
        output_nodes=1,
        bias_level=(500,),
        read_noise=(0.0, 5.0),
        pixel_time=(1e-7, 1e-7),
        gains=(1.0, 2.0),
    )
    base.update(kw)
    return DetectorGeometry(**base)


def point_scene(x, y, flux, sigma=1.0):
    return SceneModel(sky_level=0.0, sources=(Source(x, y, flux, sigma),))
