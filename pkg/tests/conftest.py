import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from dualbatch.model import GammaParams, PlantConfig  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def cfg():
    return PlantConfig()


@pytest.fixture
def nominal():
    return GammaParams(3.0, 1000.0, 0.1)
