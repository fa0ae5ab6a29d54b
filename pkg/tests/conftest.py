import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from superseg3d import benchmark, synth

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def oracle_scenes():
    """Ten noise-free scenes with 3..10 objects and 12..24 views."""
    out = []
    for k in range(10):
        spec = synth.random_scene_spec(1000 + k, 3 + (k * 7) % 8, 12 + (k * 5) % 13)
        out.append(synth.build_scene(spec))
    return out


@pytest.fixture(scope="session")
def noisy_scenes():
    return benchmark.benchmark_scenes(10)


@pytest.fixture(scope="session")
def small_scene():
    spec = synth.random_scene_spec(5, num_objects=3, num_views=12)
    return synth.build_scene(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
