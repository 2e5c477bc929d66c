"""Shared synthetic set-ups for the retargeting tests."""
import numpy as np

from vidplan.retarget import CameraModel, RetargetConfig, RobotModel, six_dof_arm
from vidplan.retarget.rotations import from_axis_angle
from vidplan.synthdata import circle_path, gen_pose_trace

# camera looks along robot +x: camera z -> robot x, camera x -> robot -y, camera y -> robot -z
M_CAM = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
T_ALIGN = np.array([-0.6, 0.0, 0.4])
DIAMETER = 0.4


def circle_round_trip(n=200, noise_px=2.0, dropout=0.1, seed=0):
    """Wrist circle 1 m in front of the camera, gripper pointing down in the robot frame."""
    cam = CameraModel(600.0, 600.0, 320.0, 240.0)
    path = circle_path(n, center=(0.0, 0.0, 1.0), diameter=DIAMETER)
    q_cam = from_axis_angle(M_CAM.T @ [0.0, 1.0, 0.0], np.pi)
    frames, truth = gen_pose_trace(path, cam, noise_px, dropout, seed=seed,
                                   quats=np.tile(q_cam, (n, 1)))
    cfg = RetargetConfig(M=M_CAM, t_align=T_ALIGN)
    robot = RobotModel(six_dof_arm())
    gt_robot = truth.positions_cam @ M_CAM.T + T_ALIGN
    return frames, cam, robot, cfg, truth, gt_robot
