"""Pose-trace records and their JSON-lines file format.

The first line is a header ``{"camera": {...}}``; every following line is one
frame with keys ``frame_idx, t_sec, wrist_uv, depth, quat_cam, valid,
keypoints_cam``.  ``depth`` is ``null`` when unavailable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel

N_KEYPOINTS = 21
WRIST, THUMB_TIP, INDEX_TIP = 0, 4, 8
FINGERTIPS = (4, 8, 12, 16, 20)


@dataclass
class PoseTraceFrame:
    frame_idx: int
    t_sec: float
    wrist_uv: tuple[float, float]
    depth: float | None
    quat_cam: tuple[float, float, float, float]
    valid: bool = True
    keypoints_cam: np.ndarray = field(default_factory=lambda: np.zeros((N_KEYPOINTS, 3)))

    def __post_init__(self):
        self.keypoints_cam = np.asarray(self.keypoints_cam, dtype=np.float64).reshape(N_KEYPOINTS, 3)
        if self.valid:
            n = np.linalg.norm(self.quat_cam)
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"frame {self.frame_idx}: quaternion norm {n} is not 1")
        if self.depth is not None and not self.depth > 0:
            raise ValueError(f"frame {self.frame_idx}: depth must be positive")


@dataclass
class WristTrajectory:
    t_sec: np.ndarray         # [T]
    positions: np.ndarray     # [T, 3] metres
    quats: np.ndarray         # [T, 4] unit (w, x, y, z)
    frame: str = "camera0"

    def __post_init__(self):
        self.t_sec = np.asarray(self.t_sec, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.quats = np.asarray(self.quats, dtype=np.float64)
        if self.frame not in ("camera0", "robot"):
            raise ValueError(f"unknown frame tag {self.frame!r}")
        n = len(self.t_sec)
        if self.positions.shape != (n, 3) or self.quats.shape != (n, 4):
            raise ValueError("trajectory arrays disagree on length")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite trajectory positions")

    def __len__(self):
        return len(self.t_sec)


def write_trace(path, frames: list[PoseTraceFrame], cam: CameraModel) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"camera": cam.to_dict()}) + "\n")
        for f in frames:
            fh.write(json.dumps({
                "frame_idx": f.frame_idx, "t_sec": f.t_sec,
                "wrist_uv": list(map(float, f.wrist_uv)), "depth": f.depth,
                "quat_cam": list(map(float, f.quat_cam)), "valid": bool(f.valid),
                "keypoints_cam": f.keypoints_cam.tolist(),
            }) + "\n")


def read_trace(path) -> tuple[list[PoseTraceFrame], CameraModel]:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace")
    header = json.loads(lines[0])
    if "camera" not in header:
        raise ValueError(f"{path}: first line must carry the camera header")
    cam = CameraModel.from_dict(header["camera"])
    frames = []
    for ln in lines[1:]:
        d = json.loads(ln)
        frames.append(PoseTraceFrame(
            frame_idx=int(d["frame_idx"]), t_sec=float(d["t_sec"]),
            wrist_uv=tuple(d["wrist_uv"]), depth=d.get("depth"),
            quat_cam=tuple(d["quat_cam"]), valid=bool(d.get("valid", True)),
            keypoints_cam=np.array(d.get("keypoints_cam", np.zeros((N_KEYPOINTS, 3))))))
    return frames, cam
