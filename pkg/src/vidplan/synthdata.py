"""Synthetic worlds: a moving-square video toy and noisy wrist pose traces."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MOTIONS = {"right": (1, 0), "left": (-1, 0), "down": (0, 1), "up": (0, -1)}
MOTION_NAMES = tuple(MOTIONS)


@dataclass(frozen=True)
class ToyWorldSpec:
    """A square translating over a torus (positions wrap at the borders)."""

    grid: int = 8
    size: int = 2
    x0: int = 0
    y0: int = 0
    motion: str = "right"
    speed: int = 1
    frames: int = 13
    seed: int = 0

    def __post_init__(self):
        if self.motion not in MOTIONS:
            raise ValueError(f"unknown motion {self.motion!r}")
        if not 0 < self.size <= self.grid:
            raise ValueError("square must fit in the grid")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")


def square_frame(grid: int, size: int, x: int, y: int) -> np.ndarray:
    frame = -np.ones((1, grid, grid))
    ys = np.arange(y, y + size) % grid
    xs = np.arange(x, x + size) % grid
    frame[0, ys[:, None], xs[None, :]] = 1.0
    return frame


def gen_clip(spec: ToyWorldSpec) -> tuple[np.ndarray, str]:
    """``([frames, 1, grid, grid] in [-1, 1], caption)`` for ``spec``."""
    dx, dy = MOTIONS[spec.motion]
    video = np.stack([
        square_frame(spec.grid, spec.size, spec.x0 + dx * spec.speed * t,
                     spec.y0 + dy * spec.speed * t)
        for t in range(spec.frames)])
    return video, spec.motion


def random_spec(rng: np.random.Generator, base: ToyWorldSpec = ToyWorldSpec()) -> ToyWorldSpec:
    return replace(base, x0=int(rng.integers(base.grid)), y0=int(rng.integers(base.grid)),
                   motion=MOTION_NAMES[int(rng.integers(4))], seed=int(rng.integers(2**31)))


def classify_motion(video: np.ndarray, speed: int = 1, start: int = 1) -> str:
    """Nearest-template motion label of ``video[start:]`` relative to ``video[0]``.

    Every candidate direction predicts frame ``t`` as frame 0 rolled by
    ``t * speed`` pixels; the direction with the lowest total squared error wins.
    Rolling handles the wrap-around of the torus world.
    """
    video = np.asarray(video)
    ref = video[0]
    best, best_err = None, np.inf
    for name, (dx, dy) in MOTIONS.items():
        err = 0.0
        for t in range(start, len(video)):
            pred = np.roll(ref, (dy * speed * t, dx * speed * t), axis=(-2, -1))
            err += float(np.sum((video[t] - pred) ** 2))
        if err < best_err:
            best, best_err = name, err
    return best


# --------------------------------------------------------------------------- pose traces


@dataclass
class PoseTraceTruth:
    positions_cam: np.ndarray   # [T, 3] ground-truth wrist positions, camera frame
    quats_cam: np.ndarray       # [T, 4] ground-truth orientations (w, x, y, z)
    dropped: np.ndarray         # [T] bool, frames removed by the dropout draw


def circle_path(n: int, center=(0.0, 0.0, 1.0), diameter: float = 0.4,
                normal_axis: int = 2) -> np.ndarray:
    """``n`` points around a circle in a plane orthogonal to ``normal_axis``."""
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    r = diameter / 2.0
    pts = np.zeros((n, 3))
    axes = [a for a in range(3) if a != normal_axis]
    pts[:, axes[0]] = r * np.cos(th)
    pts[:, axes[1]] = r * np.sin(th)
    return pts + np.asarray(center, dtype=np.float64)


def gen_pose_trace(path: np.ndarray, cam, noise_px: float = 0.0, dropout: float = 0.0,
                   seed: int = 0, fps: float = 16.0, quats: np.ndarray | None = None,
                   keypoints: np.ndarray | None = None):
    """Project a camera-frame wrist path to a corrupted :class:`PoseTraceFrame` list.

    Pixels get i.i.d. Gaussian noise of ``noise_px``; each frame is dropped
    (``valid=False``, depth missing) with probability ``dropout``.  Depth stays
    exact so that noise enters only through the pixel coordinates.
    """
    from .retarget.camera import project
    from .retarget.trace import PoseTraceFrame

    rng = np.random.default_rng(seed)
    path = np.asarray(path, dtype=np.float64)
    n = len(path)
    if quats is None:
        quats = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    if keypoints is None:
        keypoints = np.zeros((n, 21, 3))
    dropped = rng.random(n) < dropout
    uv = np.array([project(p, cam) for p in path])
    uv = uv + noise_px * rng.standard_normal(uv.shape)
    frames = []
    for i in range(n):
        ok = not dropped[i]
        frames.append(PoseTraceFrame(
            frame_idx=i, t_sec=i / fps, wrist_uv=tuple(uv[i]),
            depth=float(path[i, 2]) if ok else None,
            quat_cam=tuple(quats[i]), valid=ok, keypoints_cam=keypoints[i].copy()))
    return frames, PoseTraceTruth(path.copy(), np.asarray(quats, dtype=np.float64), dropped)
