from .attitude_codec import AttitudeCodebook, AttitudeLabel, build_codebook, decode_attitude, make_label
from .camera_geometry import BoundingBox, PinholeCamera
from .config import Config
from .logger import setup_logger
from .pose_pipeline import PoseEstimate, PosePipeline
from .position_solver import SolverConfig, solve_position
from .rotations import Pose, UnitQuaternion
from .wireframe_model import WireframeModel, mock_target

__all__ = [
    'AttitudeCodebook',
    'AttitudeLabel',
    'BoundingBox',
    'Config',
    'PinholeCamera',
    'Pose',
    'PoseEstimate',
    'PosePipeline',
    'SolverConfig',
    'UnitQuaternion',
    'WireframeModel',
    'build_codebook',
    'decode_attitude',
    'make_label',
    'mock_target',
    'setup_logger',
    'solve_position',
]
