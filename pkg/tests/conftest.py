import numpy as np
import pytest

from clickseg import synth


@pytest.fixture
def small_scene():
    spec = synth.random_scene_spec(11, n_objects=5, n_scans=4)
    return synth.generate_synthetic(spec, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
