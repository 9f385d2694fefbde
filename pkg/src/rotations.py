"""Quaternion algebra, uniform rotation sampling and weighted averaging.

Quaternions are scalar-first (w, x, y, z) everywhere outside
``quaternions_from_uniforms``, which follows the subgroup algorithm's own
4-tuple order (s1*r1, c1*r1, s2*r2, c2*r2) and assigns it to (x, y, z, w).
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from .errors import InvalidQuaternionError
from .rng import stream

_NORM_TOL = 1e-12

RotationMatrix = np.ndarray


@dataclass(frozen=True)
class UnitQuaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        q = np.array([self.w, self.x, self.y, self.z], dtype=float)
        if not np.all(np.isfinite(q)):
            raise InvalidQuaternionError(f"Non-finite quaternion components: {q.tolist()}")
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            raise InvalidQuaternionError("Zero quaternion cannot represent a rotation")
        # Already-unit inputs are kept bit-exact so stored records reload identically
        if abs(norm - 1.0) > _NORM_TOL:
            q = q / norm
        for name, value in zip("wxyz", q):
            object.__setattr__(self, name, float(value))

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q: Sequence[float]) -> "UnitQuaternion":
        w, x, y, z = (float(c) for c in q)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0 or not np.isfinite(norm):
            raise InvalidQuaternionError(f"Invalid rotation axis: {axis.tolist()}")
        s = math.sin(angle / 2.0)
        x, y, z = axis / norm * s
        return cls(math.cos(angle / 2.0), x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conj(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __neg__(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)

    def angle(self) -> float:
        """Rotation angle in [0, pi]."""
        return 2.0 * math.atan2(math.hypot(self.x, self.y, self.z), abs(self.w))


@dataclass(frozen=True, eq=False)
class Pose:
    """Attitude q_BC and position t_BC (meters) of the body frame in the camera frame."""

    q: UnitQuaternion
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError(f"Pose translation must be finite, got {t.tolist()}")
        t.flags.writeable = False
        object.__setattr__(self, "t", t)

    @property
    def range(self) -> float:
        return float(np.linalg.norm(self.t))

    def rotation_matrix(self) -> RotationMatrix:
        return to_rotation_matrix(self.q)


def _hamilton(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of (..., 4) scalar-first arrays."""
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def conj(q: UnitQuaternion) -> UnitQuaternion:
    return q.conj()


def compose(q1: UnitQuaternion, q2: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product q1 * q2, renormalized. R(q1 * q2) = R(q1) R(q2)."""
    p = _hamilton(q1.as_array(), q2.as_array())
    return UnitQuaternion.from_array(p / np.linalg.norm(p))


def to_rotation_matrix(q: UnitQuaternion) -> RotationMatrix:
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def angular_distances(quats: np.ndarray, q: UnitQuaternion) -> np.ndarray:
    """Angle between each row of an (N, 4) array and q, in radians.

    Equal to 2*acos(|z_w|) for z = quats_i * conj(q); the atan2 form keeps
    full precision near 0 and pi.
    """
    quats = np.atleast_2d(np.asarray(quats, dtype=float))
    z = _hamilton(quats, np.broadcast_to(q.conj().as_array(), quats.shape))
    return 2.0 * np.arctan2(np.linalg.norm(z[:, 1:], axis=1), np.abs(z[:, 0]))


def angular_distance(q1: UnitQuaternion, q2: UnitQuaternion) -> float:
    """Rotation angle of q1 * conj(q2) in [0, pi]; symmetric and sign-invariant."""
    return float(angular_distances(q1.as_array()[None, :], q2)[0])


def quaternions_from_uniforms(x0: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Subgroup algorithm on given uniforms; returns (N, 4) in algorithm order (s1r1, c1r1, s2r2, c2r2)."""
    x0, x1, x2 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x0, x1, x2))
    theta1 = 2.0 * np.pi * x1
    theta2 = 2.0 * np.pi * x2
    s1, c1 = np.sin(theta1), np.cos(theta1)
    s2, c2 = np.sin(theta2), np.cos(theta2)
    r1 = np.sqrt(1.0 - x0)
    r2 = np.sqrt(x0)
    return np.stack([s1 * r1, c1 * r1, s2 * r2, c2 * r2], axis=-1)


def uniform_quaternion_array(rng: np.random.Generator, m: int) -> np.ndarray:
    """m Haar-uniform quaternions drawn from rng as an (m, 4) scalar-first array."""
    if m < 1:
        raise ValueError(f"Need at least one rotation, got m={m}")
    x0 = rng.random(m)
    x1 = rng.random(m)
    x2 = rng.random(m)
    xyzw = quaternions_from_uniforms(x0, x1, x2)
    return xyzw[:, [3, 0, 1, 2]]


def sample_uniform_rotations(m: int, seed: int) -> List[UnitQuaternion]:
    """m uniformly distributed rotations, reproducible for a given seed."""
    if m < 1:
        raise ValueError(f"Need at least one rotation, got m={m}")
    return [UnitQuaternion.from_array(q) for q in uniform_quaternion_array(stream(seed), m)]


def canonical(q: np.ndarray) -> np.ndarray:
    """Representative of ±q with the first nonzero component positive."""
    q = np.asarray(q, dtype=float)
    nonzero = np.flatnonzero(q)
    if nonzero.size and q[nonzero[0]] < 0:
        return -q
    return q


def weighted_average(quats: Iterable[UnitQuaternion], weights: Sequence[float]) -> UnitQuaternion:
    """Principal eigenvector of the weight-normalized sum of outer products q q^T.

    The result does not depend on the sign of any input or on input order.
    """
    Q = np.array([q.as_array() for q in quats], dtype=float).reshape(-1, 4)
    gamma = np.asarray(weights, dtype=float).reshape(-1)
    if Q.shape[0] == 0:
        raise ValueError("Cannot average an empty set of quaternions")
    if Q.shape[0] != gamma.shape[0]:
        raise ValueError(f"Got {Q.shape[0]} quaternions but {gamma.shape[0]} weights")
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0):
        raise ValueError("Weights must be finite and non-negative")
    total = gamma.sum()
    if total <= 0:
        raise ValueError("Weights must not all be zero")

    # Accumulate in a canonical order so permuted inputs give identical bits
    Q = np.array([canonical(q) for q in Q])
    order = np.lexsort((gamma, Q[:, 3], Q[:, 2], Q[:, 1], Q[:, 0]))
    A = np.zeros((4, 4))
    for i in order:
        A += gamma[i] * np.outer(Q[i], Q[i])
    A /= total

    eigenvalues, eigenvectors = np.linalg.eigh(A)
    q = eigenvectors[:, np.argmax(eigenvalues)]
    return UnitQuaternion.from_array(canonical(q / np.linalg.norm(q)))
