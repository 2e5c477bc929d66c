"""Hand retargeting: dexterous fingers by vector matching, grippers by hysteresis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .kinematics import HandModel, chain_frames
from .rotations import to_matrix
from .trace import FINGERTIPS, INDEX_TIP, THUMB_TIP, WRIST


def human_vectors(keypoints_cam: np.ndarray, quat_cam=None) -> np.ndarray:
    """Wrist-to-fingertip vectors ``[5, 3]`` expressed in the wrist frame."""
    kp = np.asarray(keypoints_cam, dtype=np.float64)
    if not np.all(np.isfinite(kp)):
        raise ValueError("non-finite hand keypoints")
    vec = kp[list(FINGERTIPS)] - kp[WRIST]
    if quat_cam is not None:
        vec = vec @ to_matrix(quat_cam)   # R^T v for each row
    return vec


def robot_vectors(hand: HandModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Fingertip positions in the hand frame and their Jacobian ``[5*3, n_dof]``."""
    q = np.asarray(q, dtype=np.float64)
    tips = np.zeros((len(hand.fingers), 3))
    J = np.zeros((3 * len(hand.fingers), hand.n_dof))
    for i, finger in enumerate(hand.fingers):
        origins, axes, tool = chain_frames(finger.chain, q[finger.dofs])
        tip = tool[:3, 3]
        tips[i] = tip
        J[3 * i:3 * i + 3, finger.dofs] = np.cross(axes, tip - origins).T
    return tips, J


@dataclass
class FingerSolve:
    q: np.ndarray
    residual: float
    iterations: int


def solve_frame(hand: HandModel, target_vecs: np.ndarray, q_init, q_prev=None,
                alpha: float = 1.0, beta: float = 0.0, damping: float = 1e-6,
                tol: float = 1e-6, max_iter: int = 50) -> FingerSolve:
    """Minimise ``sum ||alpha v_h - v_r(q)||^2 + beta ||q - q_prev||^2`` within limits."""
    if np.any(hand.lower >= hand.upper):
        raise ValueError("infeasible hand joint limits")
    target = alpha * np.asarray(target_vecs, dtype=np.float64).reshape(-1)
    q = np.clip(np.asarray(q_init, dtype=np.float64), hand.lower, hand.upper)
    n = hand.n_dof
    use_reg = q_prev is not None and beta > 0
    it = 0
    for it in range(1, max_iter + 1):
        tips, J = robot_vectors(hand, q)
        r = tips.reshape(-1) - target
        if use_reg:
            r = np.concatenate([r, np.sqrt(beta) * (q - q_prev)])
            J = np.vstack([J, np.sqrt(beta) * np.eye(n)])
        step = -np.linalg.solve(J.T @ J + damping * np.eye(n), J.T @ r)
        q_new = np.clip(q + step, hand.lower, hand.upper)
        moved = float(np.linalg.norm(q_new - q))
        q = q_new
        if moved < tol:
            break
    tips, _ = robot_vectors(hand, q)
    return FingerSolve(q, float(np.linalg.norm(tips.reshape(-1) - target)), it)


def retarget_fingers(keypoints: np.ndarray, hand: HandModel, quats=None,
                     alpha: float = 1.0, beta: float = 0.05) -> np.ndarray:
    """Joint trajectory ``[T, n_dof]`` from ``[T, 21, 3]`` camera-frame keypoints.

    The first frame starts at mid-range with no temporal term; every later
    frame is warm-started from, and regularised towards, its predecessor.
    """
    keypoints = np.asarray(keypoints, dtype=np.float64)
    if keypoints.ndim != 3 or keypoints.shape[1:] != (21, 3):
        raise ValueError("keypoints must be [T, 21, 3]")
    q_prev = None
    q_init = (hand.lower + hand.upper) / 2
    out = np.zeros((len(keypoints), hand.n_dof))
    for t, kp in enumerate(keypoints):
        vecs = human_vectors(kp, None if quats is None else quats[t])
        sol = solve_frame(hand, vecs, q_init, q_prev, alpha, beta)
        out[t] = sol.q
        q_prev = q_init = sol.q
    return out


# --------------------------------------------------------------------------- grippers


@dataclass
class GraspEvent:
    frame: int
    kind: str   # "close" | "open"


def gripper_retarget(keypoints: np.ndarray, close_threshold: float = 0.03,
                     open_threshold: float = 0.06) -> tuple[np.ndarray, list[GraspEvent]]:
    """Thumb-index aperture per frame and hysteresis grasp events.

    The gripper starts closed if the first aperture is already below
    ``close_threshold`` (no event is emitted for that initial state).
    """
    if not open_threshold > close_threshold > 0:
        raise ValueError("need open_threshold > close_threshold > 0")
    kp = np.asarray(keypoints, dtype=np.float64)
    thumb, index = kp[:, THUMB_TIP], kp[:, INDEX_TIP]
    if not (np.any(np.isfinite(thumb).all(1)) or np.any(np.isfinite(index).all(1))):
        raise ValueError("both thumb-tip and index-tip tracks are missing")
    widths = np.linalg.norm(thumb - index, axis=1)
    return widths, hysteresis_events(widths, close_threshold, open_threshold)


def hysteresis_events(widths, close_threshold: float, open_threshold: float) -> list[GraspEvent]:
    events = []
    closed = None
    for i, w in enumerate(widths):
        if not np.isfinite(w):
            continue
        if closed is None:
            closed = bool(w < close_threshold)
        elif not closed and w < close_threshold:
            closed = True
            events.append(GraspEvent(i, "close"))
        elif closed and w > open_threshold:
            closed = False
            events.append(GraspEvent(i, "open"))
    return events


class GraspPoseProvider(Protocol):
    def propose(self, frame: int, wrist_pose: np.ndarray, width: float) -> np.ndarray:
        """Return the 4x4 gripper pose to execute at ``frame``."""


class PassThroughGrasps:
    """Executes the retargeted wrist pose unchanged; stands in for a grasp predictor."""

    def propose(self, frame: int, wrist_pose: np.ndarray, width: float) -> np.ndarray:
        return np.asarray(wrist_pose)
