import pytest
import numpy as np

from src.attitude_codec import build_codebook
from src.camera_geometry import PinholeCamera
from src.rng import stream
from src.rotations import UnitQuaternion, uniform_quaternion_array
from src.scene_generator import GenConfig, generate_records
from src.wireframe_model import WireframeModel, mock_target


@pytest.fixture
def camera():
    """Reference 1920x1200 camera"""
    return PinholeCamera.speed()


@pytest.fixture
def target():
    return mock_target()


@pytest.fixture
def unit_cube():
    """Unit cube centered at the body origin"""
    corners = [[x, y, z] for z in (-0.5, 0.5) for y in (-0.5, 0.5) for x in (-0.5, 0.5)]
    return WireframeModel("cube", np.array(corners))


@pytest.fixture(scope="session")
def small_book():
    """64-class codebook used for desk-scale labels"""
    return build_codebook(64, seed=3)


@pytest.fixture(scope="session")
def small_records(small_book):
    """200 labeled scenes (m=64, n=3) for the mock target"""
    cfg = GenConfig(count=200, seed=11, camera=PinholeCamera.speed(), model=mock_target(),
                    codebook=small_book, n=3)
    return generate_records(cfg)


@pytest.fixture
def random_quaternions():
    """Factory fixture for reproducible Haar-random attitudes"""
    def _make(count, seed=0):
        return [UnitQuaternion.from_array(q) for q in uniform_quaternion_array(stream(seed, "fixture"), count)]
    return _make
