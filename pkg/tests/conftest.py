import numpy as np
import pytest

from aquasweep import scenes
from aquasweep.camgeo import CameraIntrinsics, RigidPose


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_camera():
    return CameraIntrinsics(10.0, 10.5, 5.6, 3.4, 12, 8)


@pytest.fixture
def small_pose():
    # slight rotation plus translation so no sample lands on an integer grid line
    return RigidPose.from_axis_angle([0.01, -0.02, 0.005], [0.31, -0.07, 0.05])


@pytest.fixture(scope="session")
def two_layer():
    spec = scenes.two_layer_scene()
    renders = [scenes.render(spec, i) for i in range(len(spec.poses))]
    return spec, renders


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
