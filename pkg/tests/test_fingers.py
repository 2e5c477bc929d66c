import numpy as np
import pytest

from vidplan.retarget.fingers import (PassThroughGrasps, gripper_retarget, human_vectors,
                                      hysteresis_events, retarget_fingers, robot_vectors,
                                      solve_frame)
from vidplan.retarget.kinematics import five_finger_hand
from vidplan.retarget.rotations import from_axis_angle, to_matrix
from vidplan.retarget.trace import FINGERTIPS, INDEX_TIP, THUMB_TIP

HAND = five_finger_hand()


def _keypoints_for(q, R=np.eye(3), wrist=np.zeros(3)):
    tips, _ = robot_vectors(HAND, q)
    kp = np.tile(wrist, (21, 1)).astype(float)
    kp[list(FINGERTIPS)] = wrist + tips @ R.T
    return kp


def test_planted_optimum():
    q_star = np.random.default_rng(0).uniform(0.2, 1.4, HAND.n_dof)
    tips, _ = robot_vectors(HAND, q_star)
    sol = solve_frame(HAND, tips, (HAND.lower + HAND.upper) / 2)
    assert sol.residual < 1e-6


def test_human_vectors_use_wrist_frame():
    q = np.full(HAND.n_dof, 0.5)
    quat = from_axis_angle([0, 0, 1], 0.7)
    kp = _keypoints_for(q, to_matrix(quat), np.array([0.1, 0.2, 0.5]))
    np.testing.assert_allclose(human_vectors(kp, quat), robot_vectors(HAND, q)[0], atol=1e-12)
    bad = kp.copy()
    bad[4, 0] = np.nan
    with pytest.raises(ValueError):
        human_vectors(bad)


def test_robot_vector_jacobian():
    q = np.full(HAND.n_dof, 0.6)
    tips, J = robot_vectors(HAND, q)
    h = 1e-6
    for i in range(HAND.n_dof):
        dq = np.zeros(HAND.n_dof)
        dq[i] = h
        num = (robot_vectors(HAND, q + dq)[0] - robot_vectors(HAND, q - dq)[0]).reshape(-1) / (2 * h)
        np.testing.assert_allclose(J[:, i], num, atol=1e-8)


def test_large_beta_freezes():
    q_prev = np.full(HAND.n_dof, 0.8)
    tips, _ = robot_vectors(HAND, np.full(HAND.n_dof, 0.2))
    sol = solve_frame(HAND, tips, q_prev, q_prev, beta=1e8)
    np.testing.assert_allclose(sol.q, q_prev, atol=1e-5)


def test_static_keypoints_constant_trajectory():
    kp = np.tile(_keypoints_for(np.full(HAND.n_dof, 0.7)), (6, 1, 1))
    out = retarget_fingers(kp, HAND)
    np.testing.assert_allclose(out, np.tile(out[0], (6, 1)), atol=1e-6)
    np.testing.assert_allclose(out[0], 0.7, atol=1e-4)
    with pytest.raises(ValueError):
        retarget_fingers(kp[:, :5], HAND)


def test_solution_within_limits():
    far = np.full((5, 3), 0.5)
    sol = solve_frame(HAND, far, (HAND.lower + HAND.upper) / 2)
    assert np.all(sol.q >= HAND.lower) and np.all(sol.q <= HAND.upper)


def _aperture_trace(widths):
    kp = np.zeros((len(widths), 21, 3))
    kp[:, THUMB_TIP, 0] = widths
    return kp


def test_gripper_events():
    w, ev = gripper_retarget(_aperture_trace(np.linspace(0.10, 0.01, 30)))
    assert [e.kind for e in ev] == ["close"]
    np.testing.assert_allclose(w[0], 0.10)
    osc = np.where(np.arange(40) % 2, 0.055, 0.035)
    assert gripper_retarget(_aperture_trace(osc))[1] == []
    assert gripper_retarget(_aperture_trace(np.full(10, 0.05)))[1] == []
    ev = hysteresis_events([0.1, 0.02, 0.05, 0.07, 0.02], 0.03, 0.06)
    assert [(e.frame, e.kind) for e in ev] == [(1, "close"), (3, "open"), (4, "close")]


def test_gripper_validation():
    with pytest.raises(ValueError):
        gripper_retarget(_aperture_trace([0.1]), 0.06, 0.03)
    kp = np.full((3, 21, 3), np.nan)
    with pytest.raises(ValueError):
        gripper_retarget(kp)


def test_pass_through_grasps():
    T = np.eye(4)
    assert PassThroughGrasps().propose(0, T, 0.05) is not None
    np.testing.assert_array_equal(PassThroughGrasps().propose(0, T, 0.05), T)
