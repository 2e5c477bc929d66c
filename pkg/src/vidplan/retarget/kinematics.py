"""Serial-chain kinematics: robot description, FK, Jacobian and damped least-squares IK."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from .rotations import rotation_error


_I3 = np.eye(3)


@dataclass
class Joint:
    axis: np.ndarray          # unit vector in the joint's parent frame
    origin: np.ndarray        # offset from the previous joint frame
    lower: float = -np.pi
    upper: float = np.pi
    name: str = ""

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=np.float64)
        self.origin = np.asarray(self.origin, dtype=np.float64)
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise ValueError(f"joint {self.name!r}: axis must be a unit vector")
        if not self.lower < self.upper:
            raise ValueError(f"joint {self.name!r}: lower limit must be below upper")
        x, y, z = self.axis
        self._K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
        self._K2 = self._K @ self._K

    def rotation(self, angle: float) -> np.ndarray:
        """Rodrigues' formula about the joint axis."""
        return _I3 + np.sin(angle) * self._K + (1.0 - np.cos(angle)) * self._K2


@dataclass
class Chain:
    joints: list[Joint]
    tool: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.tool = np.asarray(self.tool, dtype=np.float64)
        self.base = np.asarray(self.base, dtype=np.float64)

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    def clamp(self, q) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)


@dataclass
class Finger:
    name: str
    chain: Chain
    dofs: list[int]           # index into the hand's joint vector for each chain joint


@dataclass
class HandModel:
    dof_names: list[str]
    lower: np.ndarray
    upper: np.ndarray
    fingers: list[Finger]

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if np.any(self.lower >= self.upper):
            raise ValueError("hand joint limits must satisfy lower < upper")

    @property
    def n_dof(self) -> int:
        return len(self.dof_names)


@dataclass
class RobotModel:
    arm: Chain
    hand: HandModel | None = None


def _pose(R, p) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def chain_frames(chain: Chain, q):
    """World positions and axes of every joint plus the tool pose."""
    q = np.asarray(q, dtype=np.float64)
    R = np.eye(3)
    p = chain.base.copy()
    origins, axes = [], []
    for joint, qi in zip(chain.joints, q):
        p = p + R @ joint.origin
        axes.append(R @ joint.axis)
        origins.append(p.copy())
        R = R @ joint.rotation(qi)
    tool = _pose(R, p + R @ chain.tool)
    return np.array(origins), np.array(axes), tool


def fk(chain: Chain, q) -> np.ndarray:
    """Tool pose as a 4x4 homogeneous matrix.  Out-of-limit joints are clamped."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.n,):
        raise ValueError(f"expected {chain.n} joint values, got shape {q.shape}")
    qc = chain.clamp(q)
    if np.any(qc != q):
        warnings.warn("joint values outside limits were clamped", RuntimeWarning, stacklevel=2)
    return chain_frames(chain, qc)[2]


def jacobian(chain: Chain, q) -> np.ndarray:
    """Geometric Jacobian ``[6, n]``: linear rows first, angular rows second."""
    return _jacobian(*chain_frames(chain, q))


def _jacobian(origins, axes, tool) -> np.ndarray:
    d = tool[:3, 3] - origins
    ax = axes
    J = np.empty((6, len(ax)))
    J[0] = ax[:, 1] * d[:, 2] - ax[:, 2] * d[:, 1]
    J[1] = ax[:, 2] * d[:, 0] - ax[:, 0] * d[:, 2]
    J[2] = ax[:, 0] * d[:, 1] - ax[:, 1] * d[:, 0]
    J[3:] = ax.T
    return J


@dataclass
class IKResult:
    q: np.ndarray
    converged: bool
    iterations: int
    pos_err: float
    rot_err: float


def pose_error(target: np.ndarray, current: np.ndarray) -> np.ndarray:
    return np.concatenate([target[:3, 3] - current[:3, 3],
                           rotation_error(target[:3, :3], current[:3, :3])])


def solve_ik(chain: Chain, target, q_seed=None, *, damping: float = 0.05,
             pos_tol: float = 1e-4, rot_tol: float = 1e-3, max_iter: int = 200,
             position_only: bool = False, restarts: int = 0, max_step: float = 0.3,
             rng: np.random.Generator | None = None) -> IKResult:
    """Damped least squares: ``dq = J^T (J J^T + damping^2 I)^-1 e``, clamped to limits.

    Each update is scaled down to at most ``max_step`` rad (Euclidean norm)
    so that steps taken near singular configurations cannot overshoot.

    ``target`` is a 4x4 pose, or a 3-vector when ``position_only``.  When an
    attempt fails and ``restarts > 0``, further attempts start from uniform
    random configurations; the best attempt is returned either way.
    """
    if position_only:
        tgt = np.eye(4)
        tgt[:3, 3] = np.asarray(target, dtype=np.float64).reshape(-1)[:3]
    else:
        tgt = np.asarray(target, dtype=np.float64)
        if tgt.shape != (4, 4):
            raise ValueError("target must be a 4x4 pose")
    if not np.all(np.isfinite(tgt)):
        raise ValueError("target pose is not finite")
    lo, hi = chain.lower, chain.upper
    seed = (lo + hi) / 2 if q_seed is None else np.asarray(q_seed, dtype=np.float64)
    rows = slice(0, 3) if position_only else slice(0, 6)

    best = None
    for attempt in range(restarts + 1):
        if attempt == 0:
            q = chain.clamp(seed.copy())
        else:
            rng = rng or np.random.default_rng(0)
            q = rng.uniform(lo, hi)
        res = _dls(chain, tgt, q, rows, damping, pos_tol, rot_tol, max_iter, position_only,
                   max_step)
        if best is None or _score(res) < _score(best):
            best = res
        if res.converged:
            break
    return best


def _score(r: IKResult) -> float:
    return r.pos_err + r.rot_err * 0.1


def _dls(chain, tgt, q, rows, damping, pos_tol, rot_tol, max_iter, position_only,
         max_step, stall_window=25, stall_tol=0.05) -> IKResult:
    # damping starts at ``damping`` and adapts: halved after a step that lowers
    # the error, quadrupled (and the step rejected) otherwise.  An attempt ends
    # early once the error stops falling, so restarts get the budget instead.
    def errors(q):
        frames = chain_frames(chain, q)
        e = pose_error(tgt, frames[2])
        if position_only:
            e[3:] = 0.0
        return e, float(np.linalg.norm(e[:3])), float(np.linalg.norm(e[3:])), frames

    lam = damping
    eye = np.eye(3 if position_only else 6)
    e, pe, re, frames = errors(q)
    it = 0
    history = []
    for it in range(max_iter + 1):
        if pe < pos_tol and re < rot_tol:
            return IKResult(q.copy(), True, it, pe, re)
        history.append(float(np.linalg.norm(e[rows])))
        stalled = len(history) > stall_window and \
            history[-1] > (1.0 - stall_tol) * history[-1 - stall_window]
        if it == max_iter or lam > 1e3 or stalled:
            break
        J = _jacobian(*frames)[rows]
        dq = J.T @ np.linalg.solve(J @ J.T + lam ** 2 * eye, e[rows])
        norm = np.linalg.norm(dq)
        if norm > max_step:
            dq *= max_step / norm
        q_try = chain.clamp(q + dq)
        trial = errors(q_try)
        if np.linalg.norm(trial[0][rows]) < np.linalg.norm(e[rows]):
            q = q_try
            e, pe, re, frames = trial
            lam = max(lam * 0.5, 1e-6)
        else:
            lam *= 4.0
    return IKResult(q.copy(), False, it, pe, re)


# --------------------------------------------------------------------------- file format


def _chain_from_dict(d: dict) -> Chain:
    joints = [Joint(axis=j["axis"], origin=j.get("origin", [0, 0, 0]),
                    lower=j.get("lower", -np.pi), upper=j.get("upper", np.pi),
                    name=j.get("name", f"j{i}"))
              for i, j in enumerate(d["joints"])]
    return Chain(joints, tool=d.get("tool", [0, 0, 0]), base=d.get("base", [0, 0, 0]))


def _chain_to_dict(c: Chain) -> dict:
    return {"base": c.base.tolist(), "tool": c.tool.tolist(),
            "joints": [{"name": j.name, "axis": j.axis.tolist(), "origin": j.origin.tolist(),
                        "lower": j.lower, "upper": j.upper} for j in c.joints]}


def robot_from_dict(d: dict) -> RobotModel:
    hand = None
    if d.get("hand"):
        h = d["hand"]
        fingers = [Finger(f["name"], _chain_from_dict(f), list(f["dofs"])) for f in h["fingers"]]
        hand = HandModel(list(h["dof_names"]), h["lower"], h["upper"], fingers)
    return RobotModel(_chain_from_dict(d["arm"]), hand)


def robot_to_dict(robot: RobotModel) -> dict:
    d = {"arm": _chain_to_dict(robot.arm)}
    if robot.hand is not None:
        h = robot.hand
        d["hand"] = {"dof_names": h.dof_names, "lower": h.lower.tolist(), "upper": h.upper.tolist(),
                     "fingers": [dict(_chain_to_dict(f.chain), name=f.name, dofs=f.dofs)
                                 for f in h.fingers]}
    return d


def load_robot(path) -> RobotModel:
    return robot_from_dict(json.loads(Path(path).read_text()))


def save_robot(path, robot: RobotModel) -> None:
    Path(path).write_text(json.dumps(robot_to_dict(robot), indent=2))


# --------------------------------------------------------------------------- reference models


def planar_two_link(l1: float = 1.0, l2: float = 1.0) -> Chain:
    z = [0.0, 0.0, 1.0]
    return Chain([Joint(z, [0, 0, 0], name="shoulder"),
                  Joint(z, [l1, 0, 0], name="elbow")], tool=[l2, 0, 0])


def six_dof_arm() -> Chain:
    """Yaw-pitch-pitch arm with a spherical z-y-z wrist (about 1.15 m reach)."""
    z, y = [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]
    lim = np.deg2rad(170.0)
    return Chain([
        Joint(z, [0, 0, 0], -lim, lim, "j1"),
        Joint(y, [0, 0, 0.3], -lim, lim, "j2"),
        Joint(y, [0, 0, 0.4], -lim, lim, "j3"),
        Joint(z, [0, 0, 0.35], -lim, lim, "j4"),
        Joint(y, [0, 0, 0], -lim, lim, "j5"),
        Joint(z, [0, 0, 0], -lim, lim, "j6"),
    ], tool=[0, 0, 0.1])


def five_finger_hand() -> HandModel:
    """Ten-DoF hand: two flexion joints per finger, fingers fanned along +y."""
    fingers, names = [], []
    lower, upper = [], []
    bases = {"thumb": ([0.02, -0.03, 0.03], [1, 0, 0]),
             "index": ([0.0, -0.02, 0.09], [0, 1, 0]),
             "middle": ([0.0, 0.0, 0.095], [0, 1, 0]),
             "ring": ([0.0, 0.02, 0.09], [0, 1, 0]),
             "pinky": ([0.0, 0.04, 0.08], [0, 1, 0])}
    for fname, (base, axis) in bases.items():
        dofs = []
        for k, seg in enumerate((0.045, 0.035)):
            dofs.append(len(names))
            names.append(f"{fname}_{k}")
            lower.append(0.0)
            upper.append(1.6)
        chain = Chain([Joint(axis, [0, 0, 0], 0.0, 1.6, f"{fname}_0"),
                       Joint(axis, [0, 0, 0.045], 0.0, 1.6, f"{fname}_1")],
                      tool=[0, 0, 0.035], base=base)
        fingers.append(Finger(fname, chain, dofs))
    return HandModel(names, lower, upper, fingers)
