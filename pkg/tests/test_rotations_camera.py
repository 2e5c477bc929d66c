import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation, Slerp

from vidplan.retarget.camera import CameraModel, backproject_wrist, project, sample_depth, to_world
from vidplan.retarget.rotations import (angle_between, conjugate, from_axis_angle, from_matrix,
                                        is_rotation, make_continuous, multiply, slerp, to_matrix)

Z90 = from_axis_angle([0, 0, 1], np.pi / 2)


def test_slerp_midpoint_closed_form():
    q = slerp([1, 0, 0, 0], Z90, 0.5)
    np.testing.assert_allclose(q, [np.cos(np.pi / 8), 0, 0, np.sin(np.pi / 8)], atol=1e-10)
    np.testing.assert_allclose(q, [0.92388, 0, 0, 0.38268], atol=1e-5)


def test_slerp_endpoints_and_antipodal():
    q1 = from_axis_angle([1, 2, 3], 0.7)
    np.testing.assert_allclose(slerp([1, 0, 0, 0], q1, 0.0), [1, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(slerp([1, 0, 0, 0], q1, 1.0), q1, atol=1e-12)
    for t in (0.0, 0.3, 1.0):
        assert angle_between(slerp(q1, -q1, t), q1) < 1e-7
    with pytest.raises(ValueError):
        slerp([0, 0, 0, 0], q1, 0.5)


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.floats(0, 1))
def test_slerp_matches_scipy(seed, t):
    r = Rotation.random(2, random_state=seed)
    ref = Slerp([0, 1], r)([t]).as_quat()[0]
    ours = slerp(np.roll(r[0].as_quat(), 1), np.roll(r[1].as_quat(), 1), t)
    assert angle_between(ours, np.roll(ref, 1)) < 1e-6


def test_matrix_roundtrip_and_product():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = (from_matrix(Rotation.random(random_state=rng.integers(1e6)).as_matrix())
                for _ in range(2))
        assert a[0] >= 0
        np.testing.assert_allclose(to_matrix(multiply(a, b)), to_matrix(a) @ to_matrix(b),
                                   atol=1e-12)
        np.testing.assert_allclose(to_matrix(conjugate(a)), to_matrix(a).T, atol=1e-12)
    assert is_rotation(to_matrix(Z90))
    assert not is_rotation(np.diag([1, 1, -1]))


def test_make_continuous():
    q = np.array([Z90, -Z90, Z90])
    out = make_continuous(q)
    assert np.all(out @ out[0] > 0)


def test_backprojection_examples():
    cam = CameraModel(500.0, 500.0, 320.0, 240.0)
    np.testing.assert_allclose(backproject_wrist((320, 240), 1.5, cam), [0, 0, 1.5])
    np.testing.assert_allclose(backproject_wrist((420, 240), 2.0, cam), [0.4, 0, 2])
    np.testing.assert_allclose(project([0.4, 0, 2], cam), [420, 240])
    unit = CameraModel(1.0, 1.0, 0.0, 0.0)
    np.testing.assert_allclose(backproject_wrist((2, 3), 2.0, unit), [4, 6, 2])
    assert backproject_wrist((2, 3), None, unit) is None
    assert backproject_wrist((2, 3), float("nan"), unit) is None


def test_camera_validation_and_serialisation():
    with pytest.raises(ValueError):
        CameraModel(0.0, 1.0, 0, 0)
    with pytest.raises(ValueError):
        CameraModel(1.0, 1.0, 0, 0, [(np.diag([1, 1, -1]), np.zeros(3))])
    cam = CameraModel(2.0, 3.0, 1.0, 1.0, [(to_matrix(Z90), np.ones(3))])
    back = CameraModel.from_dict(cam.to_dict())
    np.testing.assert_allclose(back.extrinsic(0)[0], cam.extrinsic(0)[0])
    with pytest.raises(ValueError):
        project([0, 0, -1], cam)


def test_to_world():
    p = np.array([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(to_world(p, (np.eye(3), np.zeros(3))), p)
    np.testing.assert_array_equal(to_world(p, (np.eye(3), [1, 0, 0])), [2, 0, 0])
    np.testing.assert_allclose(to_world(p, (to_matrix(Z90), np.zeros(3))), [0, 1, 0], atol=1e-15)


def test_sample_depth():
    d = np.full((5, 5), 2.0)
    d[2, 2] = 0.0
    d[1, 1] = 4.0
    assert sample_depth(d, 1, 1) == 4.0
    assert sample_depth(d, 2, 2) == 2.0           # median of neighbours
    assert sample_depth(d, 9, 1) is None
    assert sample_depth(np.zeros((3, 3)), 1, 1) is None
