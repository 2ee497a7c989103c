import numpy as np
import pytest

from savanna.raster import RasterImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_image(pixels, image_id="img", gsd_cm=8.0, acquired_at=None):
    return RasterImage(image_id=image_id, pixels=np.asarray(pixels, dtype=np.uint8), gsd_cm=gsd_cm, acquired_at=acquired_at)


@pytest.fixture
def image_factory():
    return make_image
