import numpy as np
import pytest

from vidplan.retarget.kinematics import (Chain, Joint, RobotModel, fk, five_finger_hand, jacobian,
                                         load_robot, planar_two_link, pose_error, save_robot,
                                         six_dof_arm, solve_ik)


def _rodrigues(axis, a):
    axis = np.asarray(axis, float)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(a) * K + (1 - np.cos(a)) * K @ K


def _hom(R=np.eye(3), p=np.zeros(3)):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def _oracle_fk(chain, q):
    T = _hom(p=chain.base)
    for j, qi in zip(chain.joints, q):
        T = T @ _hom(p=j.origin) @ _hom(R=_rodrigues(j.axis, qi))
    return T @ _hom(p=chain.tool)


def test_two_link_fk():
    c = planar_two_link()
    np.testing.assert_allclose(fk(c, [0, 0]), _hom(p=[2, 0, 0]), atol=1e-15)
    T = fk(c, [np.pi / 2, 0])
    np.testing.assert_allclose(T[:3, 3], [0, 2, 0], atol=1e-15)


def test_fk_matches_matrix_chain():
    arm = six_dof_arm()
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = rng.uniform(arm.lower, arm.upper)
        np.testing.assert_allclose(fk(arm, q), _oracle_fk(arm, q), atol=1e-12)


def test_fk_clamps_with_warning():
    c = Chain([Joint([0, 0, 1], [0, 0, 0], -1, 1)], tool=[1, 0, 0])
    with pytest.warns(RuntimeWarning):
        T = fk(c, [2.0])
    np.testing.assert_allclose(T, fk(c, [1.0]))
    with pytest.raises(ValueError):
        fk(c, [0.0, 1.0])


def test_jacobian_matches_finite_differences():
    arm = six_dof_arm()
    q = np.random.default_rng(1).uniform(-1, 1, 6)
    J = jacobian(arm, q)
    h = 1e-6
    for i in range(6):
        dq = np.zeros(6)
        dq[i] = h
        Tp, Tm = fk(arm, q + dq), fk(arm, q - dq)
        np.testing.assert_allclose(J[:3, i], (Tp[:3, 3] - Tm[:3, 3]) / (2 * h), atol=1e-7)
        np.testing.assert_allclose(J[3:, i], pose_error(Tp, Tm)[3:] / (2 * h), atol=1e-7)


def test_two_link_ik():
    c = planar_two_link()
    r = solve_ik(c, [2, 0, 0], np.zeros(2), position_only=True)
    assert r.converged and np.allclose(r.q, 0)
    r = solve_ik(c, [1, 1, 0], np.zeros(2), position_only=True)
    assert r.converged
    # analytic elbow-up branch: q2 = acos((x^2 + y^2 - 2) / 2), q1 = atan2(y, x) - atan2(sin q2, 1 + cos q2)
    q2 = np.arccos((1 + 1 - 2) / 2)
    q1 = np.arctan2(1, 1) - np.arctan2(np.sin(q2), 1 + np.cos(q2))
    np.testing.assert_allclose(r.q, [q1, q2], atol=1e-3)
    np.testing.assert_allclose(np.degrees(r.q), [0, 90], atol=0.1)


def test_unreachable_points_at_target():
    c = planar_two_link()
    r = solve_ik(c, [3, 0, 0], np.zeros(2), position_only=True)
    assert not r.converged
    r = solve_ik(c, [0, 3, 0], np.zeros(2), position_only=True)
    assert not r.converged
    tip = fk(c, r.q)[:3, 3]
    assert tip @ np.array([0, 1, 0]) / np.linalg.norm(tip) > 0.999


def test_six_dof_round_trip_sample():
    arm = six_dof_arm()
    rng = np.random.default_rng(2)
    ok = 0
    for _ in range(50):
        T = fk(arm, rng.uniform(arm.lower, arm.upper))
        r = solve_ik(arm, T, restarts=20, rng=rng)
        e = pose_error(T, fk(arm, r.q))
        ok += r.converged and np.linalg.norm(e[:3]) < 1e-4 and np.linalg.norm(e[3:]) < 1e-3
    assert ok >= 49


def test_ik_rejects_bad_targets():
    with pytest.raises(ValueError):
        solve_ik(six_dof_arm(), np.eye(3))
    T = np.eye(4)
    T[0, 3] = np.nan
    with pytest.raises(ValueError):
        solve_ik(six_dof_arm(), T)


def test_model_validation():
    with pytest.raises(ValueError):
        Joint([0, 0, 2], [0, 0, 0])
    with pytest.raises(ValueError):
        Joint([0, 0, 1], [0, 0, 0], 1.0, 0.0)


def test_robot_file_roundtrip(tmp_path):
    robot = RobotModel(six_dof_arm(), five_finger_hand())
    save_robot(tmp_path / "r.json", robot)
    back = load_robot(tmp_path / "r.json")
    q = np.linspace(-1, 1, 6)
    np.testing.assert_allclose(fk(back.arm, q), fk(robot.arm, q))
    assert back.hand.dof_names == robot.hand.dof_names
    assert [f.dofs for f in back.hand.fingers] == [f.dofs for f in robot.hand.fingers]
