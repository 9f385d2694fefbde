"""Pinhole camera, perspective projection and bounding boxes."""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from dotenv import dotenv_values

from .errors import DegenerateBoxError, ModelFormatError, PointBehindCameraError
from .logger import setup_logger
from .rotations import Pose

logger = setup_logger()

MIN_DEPTH = 1e-9

# Sensor of the reference camera: 1920 x 1200 px, f = 17.6 mm, 5.86 um pixels
SPEED_FOCAL_LENGTH_M = 0.0176
SPEED_PIXEL_PITCH_M = 5.86e-6

_CAMERA_KEYS = ("N_u", "N_v", "f_x_px", "f_y_px", "c_x", "c_y", "du", "dv")


@dataclass(frozen=True)
class PinholeCamera:
    n_u: int
    n_v: int
    f_x: float
    f_y: float
    c_x: float
    c_y: float
    du: float = SPEED_PIXEL_PITCH_M
    dv: float = SPEED_PIXEL_PITCH_M

    def __post_init__(self):
        if not (self.f_x > 0 and self.f_y > 0):
            raise ValueError(f"Focal lengths must be positive, got ({self.f_x}, {self.f_y})")
        if not (0 <= self.c_x <= self.n_u and 0 <= self.c_y <= self.n_v):
            raise ValueError(
                f"Principal point ({self.c_x}, {self.c_y}) outside the {self.n_u}x{self.n_v} image"
            )

    @classmethod
    def speed(cls) -> "PinholeCamera":
        """Preset for the 1920x1200 reference camera, principal point at the image center."""
        f_px = SPEED_FOCAL_LENGTH_M / SPEED_PIXEL_PITCH_M
        return cls(n_u=1920, n_v=1200, f_x=f_px, f_y=f_px, c_x=960.0, c_y=600.0,
                   du=SPEED_PIXEL_PITCH_M, dv=SPEED_PIXEL_PITCH_M)

    @property
    def mean_focal(self) -> float:
        return 0.5 * (self.f_x + self.f_y)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned image box: B_1 left, B_2 right, B_3 top, B_4 bottom (px)."""

    b1: float
    b2: float
    b3: float
    b4: float

    def __post_init__(self):
        values = (self.b1, self.b2, self.b3, self.b4)
        if not all(math.isfinite(v) for v in values):
            raise DegenerateBoxError(f"Non-finite box edges: {values}")
        if not (self.b1 < self.b2 and self.b3 < self.b4):
            raise DegenerateBoxError(
                f"Box edges must satisfy B_1 < B_2 and B_3 < B_4, got {values}"
            )

    @property
    def width(self) -> float:
        return self.b2 - self.b1

    @property
    def height(self) -> float:
        return self.b4 - self.b3

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.b1 + self.b2), 0.5 * (self.b3 + self.b4))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3, self.b4])

    def in_frame(self, cam: PinholeCamera) -> bool:
        return self.b1 >= 0 and self.b3 >= 0 and self.b2 <= cam.n_u and self.b4 <= cam.n_v


@dataclass(frozen=True)
class ProjectedPoint:
    u: float
    v: float
    w: float


def _camera_points(pose: Pose, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xc = X @ pose.rotation_matrix().T + pose.t
    depth = Xc[:, 2]
    if np.any(depth <= MIN_DEPTH):
        worst = int(np.argmin(depth))
        raise PointBehindCameraError(
            f"Point {worst} has camera depth {depth[worst]:.6g} m (must exceed {MIN_DEPTH} m)"
        )
    return Xc


def project_points(cam: PinholeCamera, pose: Pose, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) body points; returns (N, 2) pixel coordinates and (N,) depths."""
    Xc = _camera_points(pose, X)
    w = Xc[:, 2]
    u = cam.f_x * Xc[:, 0] / w + cam.c_x
    v = cam.f_y * Xc[:, 1] / w + cam.c_y
    return np.stack([u, v], axis=1), w


def project_point(cam: PinholeCamera, pose: Pose, X: np.ndarray) -> ProjectedPoint:
    uv, w = project_points(cam, pose, np.asarray(X, dtype=float).reshape(1, 3))
    return ProjectedPoint(float(uv[0, 0]), float(uv[0, 1]), float(w[0]))


def projection_jacobians_t(cam: PinholeCamera, pose: Pose, X: np.ndarray) -> np.ndarray:
    """d(u, v)/dt for (N, 3) body points as an (N, 2, 3) array, px per meter."""
    Xc = _camera_points(pose, X)
    w = Xc[:, 2]
    J = np.zeros((Xc.shape[0], 2, 3))
    J[:, 0, 0] = cam.f_x / w
    J[:, 0, 2] = -cam.f_x * Xc[:, 0] / w**2
    J[:, 1, 1] = cam.f_y / w
    J[:, 1, 2] = -cam.f_y * Xc[:, 1] / w**2
    return J


def projection_jacobian_t(cam: PinholeCamera, pose: Pose, X: np.ndarray) -> np.ndarray:
    return projection_jacobians_t(cam, pose, np.asarray(X, dtype=float).reshape(1, 3))[0]


def box_from_points(uv: np.ndarray) -> BoundingBox:
    return BoundingBox(float(uv[:, 0].min()), float(uv[:, 0].max()),
                       float(uv[:, 1].min()), float(uv[:, 1].max()))


def tight_bbox(cam: PinholeCamera, pose: Pose, model) -> BoundingBox:
    """Un-clipped box around every projected vertex of a wireframe model."""
    uv, _ = project_points(cam, pose, model.vertices)
    return box_from_points(uv)


def save_camera(cam: PinholeCamera, path: Union[str, Path]) -> None:
    values = (cam.n_u, cam.n_v, cam.f_x, cam.f_y, cam.c_x, cam.c_y, cam.du, cam.dv)
    with open(path, "w") as f:
        for key, value in zip(_CAMERA_KEYS, values):
            f.write(f"{key}={value:.17g}\n" if isinstance(value, float) else f"{key}={value}\n")
    logger.info(f"Camera written to {path}")


def load_camera(path: Union[str, Path]) -> PinholeCamera:
    """Read a key-value camera file; c_x, c_y default to the image center."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Camera file not found: {path}")
    values = dotenv_values(path)
    try:
        n_u = int(values["N_u"])
        n_v = int(values["N_v"])
        preset = PinholeCamera.speed()
        return PinholeCamera(
            n_u=n_u,
            n_v=n_v,
            f_x=float(values["f_x_px"]),
            f_y=float(values["f_y_px"]),
            c_x=float(values.get("c_x") or n_u / 2.0),
            c_y=float(values.get("c_y") or n_v / 2.0),
            du=float(values.get("du") or preset.du),
            dv=float(values.get("dv") or preset.dv),
        )
    except KeyError as e:
        raise ModelFormatError(f"{path}: missing camera key {e}") from e
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: invalid camera value: {e}") from e


def resolve_camera(ref: str) -> PinholeCamera:
    """Camera from a preset name ("speed") or a camera file path."""
    if ref.lower() == "speed":
        return PinholeCamera.speed()
    return load_camera(ref)
