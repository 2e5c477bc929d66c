"""Quaternion helpers in (w, x, y, z) order and SLERP with hemisphere correction."""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 4:
        raise ValueError(f"quaternions need 4 components, got shape {q.shape}")
    return q


def normalize(q) -> np.ndarray:
    q = as_quat(q)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero quaternion")
    return q / n


def to_matrix(q) -> np.ndarray:
    q = normalize(q)
    return Rotation.from_quat(np.roll(q, -1, axis=-1)).as_matrix()


def from_matrix(R) -> np.ndarray:
    q = np.roll(Rotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat(), 1, axis=-1)
    # canonical hemisphere: w >= 0
    return np.where(q[..., :1] < 0, -q, q)


def from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(as_quat(a), -1, 0)
    bw, bx, by, bz = np.moveaxis(as_quat(b), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def conjugate(q) -> np.ndarray:
    return as_quat(q) * np.array([1.0, -1.0, -1.0, -1.0])


def angle_between(a, b) -> float:
    """Geodesic angle between two rotations, in radians."""
    d = abs(float(np.dot(normalize(a), normalize(b))))
    return 2.0 * np.arccos(min(1.0, d))


def is_rotation(R, tol: float = 1e-6) -> bool:
    R = np.asarray(R, dtype=np.float64)
    return (R.shape == (3, 3) and np.allclose(R @ R.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) < tol)


def slerp(q0, q1, t: float) -> np.ndarray:
    """Spherical interpolation from ``q0`` (t=0) to ``q1`` (t=1).

    ``q1`` is negated first when the pair lies in opposite hemispheres, so the
    path is the short arc and ``q`` / ``-q`` are treated as the same rotation.
    """
    q0 = as_quat(q0)
    q1 = as_quat(q1)
    if np.linalg.norm(q0) == 0 or np.linalg.norm(q1) == 0:
        raise ValueError("zero quaternion")
    q0 = q0 / np.linalg.norm(q0)
    q1 = q1 / np.linalg.norm(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    theta = np.arccos(min(dot, 1.0))
    if theta < 1e-6:
        q = (1.0 - t) * q0 + t * q1
        return q / np.linalg.norm(q)
    s = np.sin(theta)
    q = (np.sin((1.0 - t) * theta) * q0 + np.sin(t * theta) * q1) / s
    return q / np.linalg.norm(q)


def make_continuous(quats) -> np.ndarray:
    """Flip signs along a sequence so consecutive quaternions share a hemisphere."""
    q = np.array(as_quat(quats), dtype=np.float64)
    for i in range(1, len(q)):
        if np.dot(q[i], q[i - 1]) < 0:
            q[i] = -q[i]
    return q


def rotation_error(R_target, R_current) -> np.ndarray:
    """Axis-angle vector (world frame) rotating ``R_current`` onto ``R_target``."""
    R = R_target @ R_current.T
    c = (np.trace(R) - 1.0) / 2.0
    if c < -0.99:
        # near pi the skew part vanishes; defer to the robust conversion
        return Rotation.from_matrix(R).as_rotvec()
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    s = np.linalg.norm(v)
    if s < 1e-12:
        return v
    return v * (np.arctan2(s, min(c, 1.0)) / s)
