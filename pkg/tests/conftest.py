import numpy as np
import pytest

from colocov.camera_render import CameraIntrinsics
from colocov.synth_gen import ColonGenSpec, generate_colon


@pytest.fixture(scope="session")
def small_world():
    return generate_colon(ColonGenSpec(seed=1, axial_segments=80, radial_segments=24))


@pytest.fixture(scope="session")
def small_K():
    return CameraIntrinsics.from_fov(48, 40)


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
        for line in RESULTS:
            terminalreporter.write_line(line)
