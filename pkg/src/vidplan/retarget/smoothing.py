"""Gap filling and causal Savitzky-Golay smoothing of wrist trajectories."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import _kernels
from .camera import CameraModel, backproject_wrist, to_world
from .rotations import make_continuous, slerp
from .trace import PoseTraceFrame, WristTrajectory


class TraceError(ValueError):
    pass


@lru_cache(maxsize=256)
def _endpoint_weights(n: int, order: int) -> np.ndarray:
    # least-squares polynomial over samples x = -(n-1)..0, evaluated at x = 0
    x = np.arange(-(n - 1), 1, dtype=np.float64)
    V = np.vander(x, order + 1, increasing=True)
    w = np.linalg.pinv(V)[0]
    w.setflags(write=False)
    return w


def sg_weights(w: int, d: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Steady-state weights plus one warm-up weight vector per shorter prefix."""
    warm = [_endpoint_weights(n, min(d, n - 1)) for n in range(1, w)]
    return _endpoint_weights(w, d), warm


def savitzky_golay_causal(series, w: int = 9, d: int = 3) -> np.ndarray:
    """Causal Savitzky-Golay filter along axis 0.

    Output ``t`` is the degree-``d`` least-squares fit to samples
    ``t-w+1 .. t`` evaluated at ``t``.  The first ``w-1`` outputs use the
    available prefix with order ``min(d, len-1)``.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("empty series")
    if w % 2 == 0 or w <= d or d < 0:
        raise ValueError(f"need odd w > d >= 0, got w={w}, d={d}")
    flat = x.reshape(x.shape[0], -1)
    steady, warm = sg_weights(w, d)
    out = np.empty_like(flat)
    for j in range(flat.shape[1]):
        out[:, j] = _kernels.causal_fir(np.ascontiguousarray(flat[:, j]), steady, warm)
    return out.reshape(x.shape)


def complete_trajectory(frames: list[PoseTraceFrame], cam: CameraModel | None = None,
                        positions: np.ndarray | None = None) -> WristTrajectory:
    """Fill missing frames: linear in position, SLERP in orientation.

    Positions come from back-projecting each valid frame (and moving it into
    the first camera frame) unless ``positions`` is given with NaN rows for
    missing frames.  Gaps at either end hold the nearest valid pose.
    """
    n = len(frames)
    t = np.array([f.t_sec for f in frames], dtype=np.float64)
    quats = np.array([f.quat_cam for f in frames], dtype=np.float64)
    if positions is None:
        if cam is None:
            raise ValueError("need a camera to back-project the trace")
        positions = np.full((n, 3), np.nan)
        for i, f in enumerate(frames):
            if not f.valid:
                continue
            p = backproject_wrist(f.wrist_uv, f.depth, cam)
            if p is not None:
                positions[i] = to_world(p, cam.extrinsic(i))
    positions = np.asarray(positions, dtype=np.float64)
    ok = np.array([f.valid for f in frames]) & np.all(np.isfinite(positions), axis=1)
    idx = np.flatnonzero(ok)
    if len(idx) < 2:
        raise TraceError(f"only {len(idx)} valid frames; at least two are needed")

    pos = positions.copy()
    for axis in range(3):
        pos[:, axis] = np.interp(t, t[idx], positions[idx, axis])
    q = quats.copy()
    for i in np.flatnonzero(~ok):
        after = np.searchsorted(idx, i)
        if after == 0:
            q[i] = quats[idx[0]]
        elif after == len(idx):
            q[i] = quats[idx[-1]]
        else:
            a, b = idx[after - 1], idx[after]
            q[i] = slerp(quats[a], quats[b], (t[i] - t[a]) / (t[b] - t[a]))
    q[ok] = quats[ok]
    return WristTrajectory(t, pos, q, "camera0")


def smooth_pose_trajectory(traj: WristTrajectory, w: int = 9, d: int = 3) -> WristTrajectory:
    pos = savitzky_golay_causal(traj.positions, w, d)
    q = savitzky_golay_causal(make_continuous(traj.quats), w, d)
    norms = np.linalg.norm(q, axis=1)
    bad = np.flatnonzero(norms < 1e-9)
    if bad.size:
        raise TraceError(f"smoothed quaternion degenerates to zero at frame {int(bad[0])}")
    return WristTrajectory(traj.t_sec.copy(), pos, q / norms[:, None], traj.frame)
