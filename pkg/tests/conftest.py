import numpy as np
import pytest

from ptyremix.schemas import ProbeSpec
from ptyremix.services.forward_service import make_phantom, make_probe, synthetic_gray
from ptyremix.settings import reset_settings


@pytest.fixture(autouse=True)
def fresh_settings():
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_gray():
    return synthetic_gray(48, seed=3)


@pytest.fixture
def small_truth(small_gray):
    return make_phantom(small_gray, 1.0)


@pytest.fixture
def small_probe():
    return make_probe(ProbeSpec(size=16, diameter=16))


@pytest.fixture
def desk_gray():
    return synthetic_gray(240, seed=7)


@pytest.fixture
def desk_truth(desk_gray):
    return make_phantom(desk_gray, 1.0)


@pytest.fixture
def desk_probe():
    return make_probe(ProbeSpec(size=60, diameter=60))
