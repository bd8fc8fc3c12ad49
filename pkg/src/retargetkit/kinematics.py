"""Kinematic-tree robot models: forward kinematics, geometric Jacobians,
and velocity-level bound shaping for the IK solver.

Multi-DOF base joints are expanded into elementary prismatic/revolute
sub-joints so every configuration variable lives in a plain vector space:
planar-base = (x, y, yaw), floating-base = (x, y, z, rx, ry, rz) with the
rotation chained as Rx * Ry * Rz.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .se3 import Pose, compose

JOINT_DOFS = {
    "revolute": 1,
    "prismatic": 1,
    "planar-base": 3,
    "floating-base": 6,
    "fixed": 0,
}


class ModelError(ValueError):
    pass


@dataclass
class Limits:
    """Per-DOF position range, speed cap, and acceleration cap."""

    q_min: np.ndarray
    q_max: np.ndarray
    v_max: np.ndarray
    a_max: np.ndarray

    def __post_init__(self):
        for name in ("q_min", "q_max", "v_max", "a_max"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if np.any(self.q_min >= self.q_max):
            raise ModelError("q_min must be strictly below q_max")
        if np.any(self.v_max <= 0) or np.any(self.a_max <= 0):
            raise ModelError("v_max and a_max must be positive")


@dataclass
class Joint:
    name: str
    kind: str
    parent: str
    child: str
    origin: Pose = field(default_factory=Pose.identity)
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    limits: Limits | None = None

    def __post_init__(self):
        if self.kind not in JOINT_DOFS:
            raise ModelError(f"unknown joint kind {self.kind!r}")
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(self.axis)
        if self.kind in ("revolute", "prismatic"):
            if n == 0:
                raise ModelError(f"joint {self.name}: axis must be nonzero")
            self.axis = self.axis / n
        dof = JOINT_DOFS[self.kind]
        if dof > 0:
            if self.limits is None:
                raise ModelError(f"joint {self.name}: movable joint needs limits")
            for arr in (self.limits.q_min, self.limits.q_max, self.limits.v_max, self.limits.a_max):
                if arr.shape != (dof,):
                    raise ModelError(f"joint {self.name}: limits must have {dof} entries")

    @property
    def dof(self) -> int:
        return JOINT_DOFS[self.kind]

    def sub_joints(self):
        """Elementary (type, local axis) pairs, one per DOF."""
        if self.kind == "revolute":
            return [("revolute", self.axis)]
        if self.kind == "prismatic":
            return [("prismatic", self.axis)]
        if self.kind == "planar-base":
            return [
                ("prismatic", np.array([1.0, 0.0, 0.0])),
                ("prismatic", np.array([0.0, 1.0, 0.0])),
                ("revolute", np.array([0.0, 0.0, 1.0])),
            ]
        if self.kind == "floating-base":
            return [
                ("prismatic", np.array([1.0, 0.0, 0.0])),
                ("prismatic", np.array([0.0, 1.0, 0.0])),
                ("prismatic", np.array([0.0, 0.0, 1.0])),
                ("revolute", np.array([1.0, 0.0, 0.0])),
                ("revolute", np.array([0.0, 1.0, 0.0])),
                ("revolute", np.array([0.0, 0.0, 1.0])),
            ]
        return []


def _axis_rotation(axis: np.ndarray, angle: float) -> Pose:
    return Pose.from_rotvec(np.zeros(3), axis * angle)


@dataclass
class RobotModel:
    joints: list
    gripper_link: str
    gripper_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        children = {}
        parents = set()
        for j in self.joints:
            if j.child in children:
                raise ModelError(f"link {j.child} has two parent joints")
            children[j.child] = j
            parents.add(j.parent)
        roots = parents - set(children)
        if len(roots) != 1:
            raise ModelError(f"model must have exactly one root link, found {sorted(roots)}")
        self.root_link = roots.pop()
        # cycle check: every chain must terminate at the root
        for link in children:
            seen = set()
            cur = link
            while cur != self.root_link:
                if cur in seen:
                    raise ModelError("kinematic tree contains a cycle")
                seen.add(cur)
                cur = children[cur].parent
        if self.gripper_link != self.root_link and self.gripper_link not in children:
            raise ModelError(f"gripper link {self.gripper_link!r} not in tree")
        self._children = children
        offsets = {}
        idx = 0
        for j in self.joints:
            offsets[j.name] = idx
            idx += j.dof
        self._dof_offset = offsets
        self.n_j = idx
        self._chain = self._chain_to(self.gripper_link)

    def _chain_to(self, link: str):
        chain = []
        cur = link
        while cur != self.root_link:
            j = self._children[cur]
            chain.append(j)
            cur = j.parent
        chain.reverse()
        return chain

    def dof_slice(self, joint: Joint) -> slice:
        start = self._dof_offset[joint.name]
        return slice(start, start + joint.dof)

    def limit_arrays(self):
        q_min = np.full(self.n_j, -np.inf)
        q_max = np.full(self.n_j, np.inf)
        v_max = np.full(self.n_j, np.inf)
        a_max = np.full(self.n_j, np.inf)
        for j in self.joints:
            if j.dof == 0:
                continue
            s = self.dof_slice(j)
            q_min[s] = j.limits.q_min
            q_max[s] = j.limits.q_max
            v_max[s] = j.limits.v_max
            a_max[s] = j.limits.a_max
        return q_min, q_max, v_max, a_max

    @staticmethod
    def from_dict(doc: dict) -> "RobotModel":
        try:
            joints = []
            for jd in doc["joints"]:
                kind = jd["kind"]
                dof = JOINT_DOFS.get(kind)
                if dof is None:
                    raise ModelError(f"unknown joint kind {kind!r}")
                origin = Pose.identity()
                if "origin" in jd:
                    origin = Pose(np.array(jd["origin"]["p"], dtype=float), np.array(jd["origin"]["q"], dtype=float))
                limits = None
                if dof > 0:
                    ld = jd["limits"]
                    qr = np.asarray(ld["q"], dtype=float)
                    if qr.ndim == 1:
                        qr = np.tile(qr, (dof, 1))
                    limits = Limits(
                        qr[:, 0],
                        qr[:, 1],
                        np.broadcast_to(np.atleast_1d(np.asarray(ld["v"], dtype=float)), (dof,)).copy(),
                        np.broadcast_to(np.atleast_1d(np.asarray(ld["a"], dtype=float)), (dof,)).copy(),
                    )
                joints.append(
                    Joint(
                        name=jd["name"],
                        kind=kind,
                        parent=jd["parent"],
                        child=jd["child"],
                        origin=origin,
                        axis=np.asarray(jd.get("axis", [0.0, 0.0, 1.0]), dtype=float),
                        limits=limits,
                    )
                )
            g = doc["gripper"]
            offset = Pose.identity()
            if "offset" in g:
                offset = Pose(np.array(g["offset"]["p"], dtype=float), np.array(g["offset"]["q"], dtype=float))
            return RobotModel(joints, g["link"], offset)
        except (KeyError, TypeError, IndexError) as exc:
            raise ModelError(f"invalid robot model document: {exc}") from exc

    @staticmethod
    def load_json(path) -> "RobotModel":
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as exc:
                raise ModelError(f"invalid robot model JSON: {exc}") from exc
        return RobotModel.from_dict(doc)


@dataclass
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(-1)
        if self.q.shape != self.qdot.shape:
            raise ModelError("q and qdot dimensions differ")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ModelError("joint state must be finite")


def _check_dim(model: RobotModel, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.n_j:
        raise ModelError(f"configuration has {q.shape[0]} entries, model has {model.n_j} DOFs")
    return q


def _chain_frames(model: RobotModel, q: np.ndarray):
    """Walk the root->gripper chain, yielding per-DOF frame data.

    Returns (gripper_pose, dof_records) where each record is
    (dof_index, sub_type, world_axis, world_point).
    """
    pose = Pose.identity()
    records = []
    for joint in model._chain:
        pose = compose(pose, joint.origin)
        qs = q[model.dof_slice(joint)]
        for i, (sub_type, axis_local) in enumerate(joint.sub_joints()):
            world_axis = pose.rotation_matrix @ axis_local
            records.append((model._dof_offset[joint.name] + i, sub_type, world_axis, pose.translation.copy()))
            if sub_type == "prismatic":
                pose = compose(pose, Pose(axis_local * qs[i], np.array([1.0, 0.0, 0.0, 0.0])))
            else:
                pose = compose(pose, _axis_rotation(axis_local, qs[i]))
    pose = compose(pose, model.gripper_offset)
    return pose, records


def forward_kinematics(model: RobotModel, q) -> Pose:
    """Pose of the gripper frame in the root frame."""
    q = _check_dim(model, q)
    pose, _ = _chain_frames(model, q)
    return pose


def jacobian(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian at the gripper frame, root-frame coordinates.

    Rows are (linear xyz, angular xyz); columns cover all model DOFs, with
    zeros for DOFs off the root->gripper chain.
    """
    q = _check_dim(model, q)
    gripper, records = _chain_frames(model, q)
    J = np.zeros((6, model.n_j))
    p_g = gripper.translation
    for col, sub_type, axis, point in records:
        if sub_type == "prismatic":
            J[:3, col] = axis
        else:
            J[:3, col] = np.cross(axis, p_g - point)
            J[3:, col] = axis
    return J


def velocity_bounds(model: RobotModel, state: JointState, dt: float):
    """Per-DOF joint-velocity box keeping one Euler step inside all limits."""
    if dt <= 0:
        raise ModelError("dt must be positive")
    q = _check_dim(model, state.q)
    qdot = _check_dim(model, state.qdot)
    q_min, q_max, v_max, a_max = model.limit_arrays()
    pos_upper = (q_max - q) / dt
    pos_lower = (q_min - q) / dt
    upper = np.minimum.reduce([v_max, pos_upper, qdot + a_max * dt])
    lower = np.maximum.reduce([-v_max, pos_lower, qdot - a_max * dt])
    # acceleration and speed terms can cross; position limits keep priority
    bad = lower > upper
    if np.any(bad):
        mid = np.clip(0.5 * (lower + upper), pos_lower, pos_upper)
        upper = np.where(bad, mid, upper)
        lower = np.where(bad, mid, lower)
    return lower, upper
