"""Relative position from a bounding box and an attitude estimate.

A coarse range/bearing initializer is refined by damped Gauss-Newton on the
tight-fit residual: the left-, right-, top- and bottom-most projected
vertices must land on the four box edges.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .camera_geometry import BoundingBox, PinholeCamera, project_points, projection_jacobians_t
from .config import Config
from .errors import DegenerateBoxError, NonConvergenceError, PointBehindCameraError, SingularNormalMatrixError
from .logger import setup_logger
from .rotations import Pose, UnitQuaternion
from .wireframe_model import WireframeModel

logger = setup_logger()

_MAX_CONDITION = 1e14


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = Config.SOLVER_MAX_ITERATIONS
    step_tol: float = Config.SOLVER_STEP_TOL
    residual_tol: float = Config.SOLVER_RESIDUAL_TOL
    lambda_init: float = Config.SOLVER_LAMBDA
    lambda_down: float = Config.SOLVER_LAMBDA_DOWN
    lambda_up: float = Config.SOLVER_LAMBDA_UP
    composed_bearing: bool = Config.COMPOSED_BEARING
    fail_on_nonconvergence: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.step_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("Tolerances must be positive")
        if not (0 < self.lambda_down < 1 < self.lambda_up) or self.lambda_init <= 0:
            raise ValueError("Damping must start positive, shrink below 1 and grow above 1")


@dataclass(frozen=True)
class BearingAngles:
    alpha: float  # azimuth, rad
    beta: float  # elevation, rad


@dataclass(frozen=True, eq=False)
class SolveReport:
    t: np.ndarray
    iterations: int
    final_residual: float  # RMS of the four edge residuals, px
    converged: bool
    extremal_indices: Tuple[int, int, int, int]
    box_in_frame: bool = True
    cost_history: Tuple[float, ...] = field(default_factory=tuple)


def bearing_angles(cam: PinholeCamera, box: BoundingBox) -> BearingAngles:
    b_x, b_y = box.center
    return BearingAngles(math.atan((b_x - cam.c_x) / cam.f_x), math.atan((b_y - cam.c_y) / cam.f_y))


def coarse_range(cam: PinholeCamera, box: BoundingBox, l_c: float) -> float:
    if l_c <= 0:
        raise ValueError(f"Characteristic length must be positive, got {l_c}")
    if box.diagonal <= 0:
        raise DegenerateBoxError("Bounding box has zero diagonal")
    return cam.mean_focal * l_c / box.diagonal


def ray_direction(alpha: float, beta: float) -> np.ndarray:
    """Unit vector whose projection lands at the pixel with bearing (alpha, beta)."""
    d = np.array([math.tan(alpha), math.tan(beta), 1.0])
    return d / np.linalg.norm(d)


def coarse_position(cam: PinholeCamera, box: BoundingBox, l_c: float, composed_bearing: bool = None) -> np.ndarray:
    """Initial t from box size (range) and box center (bearing).

    By default the body origin is placed exactly on the ray through the box
    center. ``composed_bearing`` composes two elementary axis rotations
    instead, which mirrors the target in azimuth for a y-down image.
    """
    composed_bearing = Config.COMPOSED_BEARING if composed_bearing is None else composed_bearing
    r = coarse_range(cam, box, l_c)
    angles = bearing_angles(cam, box)
    if not composed_bearing:
        return r * ray_direction(angles.alpha, angles.beta)

    ca, sa = math.cos(angles.alpha), math.sin(angles.alpha)
    cb, sb = math.cos(angles.beta), math.sin(angles.beta)
    r_alpha = np.array([[ca, 0.0, -sa], [0.0, 1.0, 0.0], [sa, 0.0, ca]])
    r_beta = np.array([[1.0, 0.0, 0.0], [0.0, cb, sb], [0.0, -sb, cb]])
    return r_alpha @ r_beta @ np.array([0.0, 0.0, r])


def _extremal_indices(uv: np.ndarray) -> Tuple[int, int, int, int]:
    # argmin/argmax return the first occurrence, so ties go to the lowest vertex index
    return (int(np.argmin(uv[:, 0])), int(np.argmax(uv[:, 0])),
            int(np.argmin(uv[:, 1])), int(np.argmax(uv[:, 1])))


def tight_fit_residual(cam: PinholeCamera, model: WireframeModel, q: UnitQuaternion,
                       box: BoundingBox, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Tuple[int, int, int, int]]:
    """Residual r(t), its 4x3 Jacobian and the extremal vertices at t."""
    pose = Pose(q, t)
    uv, _ = project_points(cam, pose, model.vertices)
    idx = _extremal_indices(uv)
    left, right, top, bottom = idx
    r = np.array([
        uv[left, 0] - box.b1,
        uv[right, 0] - box.b2,
        uv[top, 1] - box.b3,
        uv[bottom, 1] - box.b4,
    ])
    J_all = projection_jacobians_t(cam, pose, model.vertices[list(idx)])
    J = np.stack([J_all[0, 0], J_all[1, 0], J_all[2, 1], J_all[3, 1]])
    return r, J, idx


def refine_position(cam: PinholeCamera, model: WireframeModel, q: UnitQuaternion, box: BoundingBox,
                    t0: np.ndarray, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Levenberg-damped Gauss-Newton on the tight-fit residual with the attitude held fixed."""
    cfg = cfg or SolverConfig()
    if box.diagonal <= 0:
        raise DegenerateBoxError("Bounding box has zero diagonal")

    t = np.asarray(t0, dtype=float).reshape(3).copy()
    r, J, idx = tight_fit_residual(cam, model, q, box, t)
    cost = float(r @ r)
    history = [cost]
    lam = cfg.lambda_init
    converged = False
    iterations = 0

    while iterations < cfg.max_iterations:
        iterations += 1
        H = J.T @ J + lam * np.eye(3)
        if not np.all(np.isfinite(H)) or np.linalg.cond(H) > _MAX_CONDITION:
            raise SingularNormalMatrixError(f"Normal matrix is singular at t={t.tolist()}")
        try:
            delta = np.linalg.solve(H, -J.T @ r)
        except np.linalg.LinAlgError as e:
            raise SingularNormalMatrixError(f"Normal matrix is singular at t={t.tolist()}") from e

        step = float(np.linalg.norm(delta))
        try:
            r_new, J_new, idx_new = tight_fit_residual(cam, model, q, box, t + delta)
            cost_new = float(r_new @ r_new)
        except PointBehindCameraError:
            # Trial step crossed the image plane; treat like a cost increase
            cost_new = math.inf

        if cost_new < cost:
            t = t + delta
            r, J, idx, cost = r_new, J_new, idx_new, cost_new
            history.append(cost)
            lam *= cfg.lambda_down
        else:
            lam *= cfg.lambda_up
        logger.debug(f"iter {iterations}: cost={cost:.6g} step={step:.3g} lambda={lam:.3g}")

        if step < cfg.step_tol:
            converged = True
            break

    rms = math.sqrt(cost / 4.0)
    report = SolveReport(
        t=t,
        iterations=iterations,
        final_residual=rms,
        converged=converged,
        extremal_indices=idx,
        box_in_frame=box.in_frame(cam),
        cost_history=tuple(history),
    )
    if not converged and rms > cfg.residual_tol and cfg.fail_on_nonconvergence:
        raise NonConvergenceError(
            f"No convergence after {iterations} iterations (residual {rms:.4g} px)", report
        )
    return report


def solve_position(cam: PinholeCamera, model: WireframeModel, q: UnitQuaternion, box: BoundingBox,
                   l_c: float, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Coarse initializer followed by refinement."""
    cfg = cfg or SolverConfig()
    t0 = coarse_position(cam, box, l_c, composed_bearing=cfg.composed_bearing)
    if not box.in_frame(cam):
        logger.debug("Bounding box exceeds the image; solving anyway")
    return refine_position(cam, model, q, box, t0, cfg)
