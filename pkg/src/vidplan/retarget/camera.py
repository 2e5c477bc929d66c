"""Pinhole camera: back-projection, projection, extrinsics and depth lookup."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import is_rotation


@dataclass
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    # per-frame camera-to-first-frame rigid transforms (R_t, t_t); empty means identity
    extrinsics: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        checked = []
        for R, t in self.extrinsics:
            R = np.asarray(R, dtype=np.float64)
            t = np.asarray(t, dtype=np.float64).reshape(3)
            if not is_rotation(R):
                raise ValueError("extrinsic rotation is not in SO(3)")
            checked.append((R, t))
        self.extrinsics = checked

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def extrinsic(self, frame: int) -> tuple[np.ndarray, np.ndarray]:
        if not self.extrinsics:
            return np.eye(3), np.zeros(3)
        return self.extrinsics[frame]

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "extrinsics": [{"R": R.tolist(), "t": t.tolist()} for R, t in self.extrinsics]}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        ext = [(np.array(e["R"]), np.array(e["t"])) for e in d.get("extrinsics", [])]
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]), ext)


def backproject_wrist(uv, depth, cam: CameraModel) -> np.ndarray | None:
    """Camera-frame point ``depth * K^-1 [u, v, 1]``; ``None`` marks a missing depth."""
    if depth is None or not np.isfinite(depth) or depth <= 0:
        return None
    u, v = uv
    return np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])


def project(p_cam, cam: CameraModel) -> np.ndarray:
    x, y, z = np.asarray(p_cam, dtype=np.float64)
    if z <= 0:
        raise ValueError("point behind the camera")
    return np.array([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])


def to_world(p_cam, extrinsic) -> np.ndarray:
    R, t = extrinsic
    return np.asarray(R) @ np.asarray(p_cam, dtype=np.float64) + np.asarray(t)


def sample_depth(depth_map: np.ndarray, u: float, v: float) -> float | None:
    """Nearest-pixel depth, falling back to the median of valid 3x3 neighbours."""
    depth_map = np.asarray(depth_map, dtype=np.float64)
    h, w = depth_map.shape
    iu, iv = int(round(u)), int(round(v))
    if not (0 <= iu < w and 0 <= iv < h):
        return None
    d = depth_map[iv, iu]
    if np.isfinite(d) and d > 0:
        return float(d)
    patch = depth_map[max(iv - 1, 0):iv + 2, max(iu - 1, 0):iu + 2]
    ok = patch[np.isfinite(patch) & (patch > 0)]
    return float(np.median(ok)) if ok.size else None
