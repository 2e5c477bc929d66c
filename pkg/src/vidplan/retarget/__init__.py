"""Turning a hand-pose trace extracted from a video plan into robot joint trajectories."""
from .camera import CameraModel, backproject_wrist, project, sample_depth, to_world
from .fingers import (GraspEvent, PassThroughGrasps, gripper_retarget, hysteresis_events,
                      retarget_fingers)
from .kinematics import (Chain, HandModel, IKResult, Joint, RobotModel, fk, five_finger_hand,
                         jacobian, load_robot, planar_two_link, save_robot, six_dof_arm, solve_ik)
from .pipeline import (ActionPlan, RetargetConfig, StageError, camera_to_robot, plan_to_actions,
                       write_actions_csv)
from .rotations import slerp
from .smoothing import (TraceError, complete_trajectory, savitzky_golay_causal,
                        smooth_pose_trajectory)
from .trace import PoseTraceFrame, WristTrajectory, read_trace, write_trace

__all__ = [
    "ActionPlan", "CameraModel", "Chain", "GraspEvent", "HandModel", "IKResult", "Joint",
    "PassThroughGrasps", "PoseTraceFrame", "RetargetConfig", "RobotModel", "StageError",
    "TraceError", "WristTrajectory", "backproject_wrist", "camera_to_robot",
    "complete_trajectory", "five_finger_hand", "fk", "gripper_retarget", "hysteresis_events",
    "jacobian", "load_robot", "plan_to_actions", "planar_two_link", "project",
    "read_trace", "retarget_fingers", "sample_depth", "save_robot", "savitzky_golay_causal",
    "six_dof_arm", "slerp", "smooth_pose_trajectory", "solve_ik", "to_world",
    "write_actions_csv", "write_trace",
]
