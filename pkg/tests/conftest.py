import numpy as np
import pytest

from landaulab.acceptance import constant_field, varying_field
from landaulab.geometry import build_geometry, frame_from_tensors

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def constant_geometry():
    return build_geometry(constant_field(16))


@pytest.fixture(scope="session")
def varying_geometry():
    return build_geometry(varying_field(16))


@pytest.fixture
def isotropic_frame():
    """Frame on C^2 with B_1 = B_2 = 2 pi"""
    form = np.zeros((4, 4))
    form[0, 1], form[1, 0] = TWO_PI, -TWO_PI
    form[2, 3], form[3, 2] = TWO_PI, -TWO_PI
    return frame_from_tensors(np.eye(4), form)


@pytest.fixture
def planar_frame():
    form = np.array([[0.0, TWO_PI], [-TWO_PI, 0.0]])
    return frame_from_tensors(np.eye(2), form)
