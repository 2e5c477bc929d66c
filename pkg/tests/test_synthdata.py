import numpy as np
import pytest

from vidplan.retarget.camera import CameraModel, backproject_wrist
from vidplan.synthdata import (MOTION_NAMES, ToyWorldSpec, circle_path, classify_motion,
                               gen_clip, gen_pose_trace, random_spec)

CAM = CameraModel(600.0, 600.0, 320.0, 240.0)


def _center_x(frame):
    return np.flatnonzero(frame[0].max(axis=0) > 0)


def test_gen_clip_moves_right():
    video, cap = gen_clip(ToyWorldSpec(grid=16, size=2, x0=3, y0=5, motion="right"))
    assert cap == "right" and video.shape == (13, 1, 16, 16)
    for t in range(8):
        np.testing.assert_array_equal(_center_x(video[t]), [3 + t, 4 + t])
    assert set(np.unique(video)) == {-1.0, 1.0}


def test_same_motion_deltas_across_positions():
    a = gen_clip(ToyWorldSpec(x0=0, y0=0, motion="down", seed=1))[0]
    b = gen_clip(ToyWorldSpec(x0=4, y0=2, motion="down", seed=2))[0]
    np.testing.assert_array_equal(np.roll(a, (2, 4), axis=(-2, -1)), b)


def test_wraps_and_classifies():
    for m in MOTION_NAMES:
        video, _ = gen_clip(ToyWorldSpec(grid=8, x0=6, y0=6, motion=m, frames=13))
        assert classify_motion(video) == m
        assert (video[:, 0] > 0).sum(axis=(1, 2)).tolist() == [4] * 13


def test_spec_validation_and_random():
    with pytest.raises(ValueError):
        ToyWorldSpec(motion="diagonal")
    with pytest.raises(ValueError):
        ToyWorldSpec(size=9)
    rng = np.random.default_rng(0)
    s = random_spec(rng)
    assert 0 <= s.x0 < s.grid and s.motion in MOTION_NAMES


def test_noiseless_trace_backprojects_exactly():
    path = circle_path(32)
    frames, truth = gen_pose_trace(path, CAM)
    back = np.array([backproject_wrist(f.wrist_uv, f.depth, CAM) for f in frames])
    np.testing.assert_allclose(back, truth.positions_cam, atol=1e-12)


def test_dropout_rate():
    frames, truth = gen_pose_trace(circle_path(1000), CAM, dropout=0.1, seed=3)
    assert abs(truth.dropped.mean() - 0.1) < 0.03
    assert all((f.depth is None) == (not f.valid) for f in frames)
    assert [not f.valid for f in frames] == truth.dropped.tolist()


def test_noise_propagates_as_sigma_z_over_f():
    path = circle_path(4000)            # z = 1 m everywhere
    frames, truth = gen_pose_trace(path, CAM, noise_px=2.0, seed=4)
    back = np.array([backproject_wrist(f.wrist_uv, f.depth, CAM) for f in frames])
    err = back - truth.positions_cam
    np.testing.assert_allclose(err[:, :2].std(axis=0), 2.0 * 1.0 / 600.0, rtol=0.05)
    np.testing.assert_allclose(err[:, 2], 0.0, atol=1e-12)


def test_traces_deterministic_under_seed():
    a, _ = gen_pose_trace(circle_path(50), CAM, 2.0, 0.1, seed=9)
    b, _ = gen_pose_trace(circle_path(50), CAM, 2.0, 0.1, seed=9)
    assert [f.wrist_uv for f in a] == [f.wrist_uv for f in b]
