import os

import hypothesis
import pytest

from core.wirtinger import WPoint
from harness.catalog import get_algebroid
from harness.scenario import SamplingSpec, sample_points

hypothesis.settings.register_profile("ci", deadline=None, max_examples=25)
hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def small_sampling():
    return SamplingSpec(points=4, seed=7)


@pytest.fixture
def algebroid_points(small_sampling):
    """Factory: (algebroid, points) for a catalog name."""
    def build(name: str):
        a, _ = get_algebroid(name)
        return a, sample_points(a, small_sampling)
    return build


@pytest.fixture
def unit_point():
    return WPoint((1.0,), (2.0,))
