"""Video plan to robot actions: wrist pose chain, arm IK and hand channel."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .fingers import GraspEvent, gripper_retarget, retarget_fingers
from .kinematics import RobotModel, solve_ik
from .rotations import conjugate, from_matrix, is_rotation, multiply, to_matrix
from .smoothing import complete_trajectory, smooth_pose_trajectory
from .trace import PoseTraceFrame, WristTrajectory

LEFT_MULT, CONJUGATE = "left_mult", "conjugate"


class StageError(RuntimeError):
    def __init__(self, stage: str, frame: int | None, cause: Exception):
        where = f" at frame {frame}" if frame is not None else ""
        super().__init__(f"{stage}{where}: {cause}")
        self.stage, self.frame, self.cause = stage, frame, cause


@dataclass
class RetargetConfig:
    M: np.ndarray = field(default_factory=lambda: np.eye(3))
    t_align: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation_map_mode: str = CONJUGATE
    sg_window: int = 9
    sg_order: int = 3
    alpha: float = 1.0
    beta: float = 0.05
    grasp_close_threshold: float = 0.03
    grasp_open_threshold: float = 0.06
    hand_mode: str = "dexterous"        # or "gripper"
    ik_restarts: int = 4

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=np.float64)
        self.t_align = np.asarray(self.t_align, dtype=np.float64).reshape(3)
        if self.sg_window % 2 == 0 or self.sg_window <= self.sg_order:
            raise ValueError("sg_window must be odd and greater than sg_order")
        if not self.grasp_open_threshold > self.grasp_close_threshold > 0:
            raise ValueError("need grasp_open_threshold > grasp_close_threshold > 0")
        if self.rotation_map_mode not in (LEFT_MULT, CONJUGATE):
            raise ValueError(f"unknown rotation_map_mode {self.rotation_map_mode!r}")
        if self.hand_mode not in ("dexterous", "gripper"):
            raise ValueError(f"unknown hand_mode {self.hand_mode!r}")


def camera_to_robot(traj: WristTrajectory, cfg: RetargetConfig) -> WristTrajectory:
    """Map positions by ``M p + t`` and orientations by ``M R`` or ``M R M^T``."""
    M = cfg.M
    if not is_rotation(M):
        raise ValueError("camera-to-robot rotation M is not in SO(3)")
    pos = traj.positions @ M.T + cfg.t_align
    # quaternion products keep the input's sign continuity
    qm = from_matrix(M)
    q = multiply(qm, traj.quats)
    if cfg.rotation_map_mode == CONJUGATE:
        q = multiply(q, conjugate(qm))
    return WristTrajectory(traj.t_sec.copy(), pos, q, "robot")


def wrist_poses(traj: WristTrajectory) -> np.ndarray:
    T = np.tile(np.eye(4), (len(traj), 1, 1))
    T[:, :3, :3] = to_matrix(traj.quats)
    T[:, :3, 3] = traj.positions
    return T


@dataclass
class ActionPlan:
    t_sec: np.ndarray
    arm_q: np.ndarray
    converged: np.ndarray
    wrist: WristTrajectory
    hand_q: np.ndarray | None = None
    gripper_width: np.ndarray | None = None
    grasp_events: list[GraspEvent] = field(default_factory=list)


def plan_to_actions(frames: list[PoseTraceFrame], cam: CameraModel, robot: RobotModel,
                    cfg: RetargetConfig, q_seed=None) -> ActionPlan:
    def stage(name, fn, *args, frame=None):
        try:
            return fn(*args)
        except StageError:
            raise
        except Exception as exc:  # tag and re-raise with context
            raise StageError(name, frame, exc) from exc

    traj = stage("complete", complete_trajectory, frames, cam)
    traj = stage("smooth", smooth_pose_trajectory, traj, cfg.sg_window, cfg.sg_order)
    traj = stage("camera_to_robot", camera_to_robot, traj, cfg)

    targets = wrist_poses(traj)
    arm = robot.arm
    q = (arm.lower + arm.upper) / 2 if q_seed is None else np.asarray(q_seed, dtype=np.float64)
    arm_q = np.zeros((len(traj), arm.n))
    ok = np.zeros(len(traj), dtype=bool)
    rng = np.random.default_rng(0)
    for i, T in enumerate(targets):
        res = stage("ik", lambda: solve_ik(arm, T, q, restarts=cfg.ik_restarts, rng=rng), frame=i)
        arm_q[i], ok[i] = res.q, res.converged
        q = res.q

    plan = ActionPlan(traj.t_sec, arm_q, ok, traj)
    keypoints = np.stack([f.keypoints_cam for f in frames])
    if cfg.hand_mode == "gripper":
        widths, events = stage("gripper", gripper_retarget, keypoints,
                               cfg.grasp_close_threshold, cfg.grasp_open_threshold)
        plan.gripper_width, plan.grasp_events = widths, events
    elif robot.hand is not None:
        quats = np.array([f.quat_cam for f in frames])
        plan.hand_q = stage("fingers", retarget_fingers, keypoints, robot.hand, quats,
                            cfg.alpha, cfg.beta)
    return plan


def write_actions_csv(path, plan: ActionPlan, robot: RobotModel) -> None:
    arm_names = [j.name or f"arm_{i}" for i, j in enumerate(robot.arm.joints)]
    header = ["t_sec"] + arm_names
    if plan.gripper_width is not None:
        header += ["gripper_width", "event"]
        events = {e.frame: e.kind for e in plan.grasp_events}
    elif plan.hand_q is not None:
        header += list(robot.hand.dof_names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, t in enumerate(plan.t_sec):
            row = [f"{t:.6f}"] + [f"{v:.9f}" for v in plan.arm_q[i]]
            if plan.gripper_width is not None:
                row += [f"{plan.gripper_width[i]:.9f}", events.get(i, "")]
            elif plan.hand_q is not None:
                row += [f"{v:.9f}" for v in plan.hand_q[i]]
            w.writerow(row)
