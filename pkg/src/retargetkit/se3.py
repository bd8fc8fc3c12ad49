"""Rigid-body pose algebra and trajectory containers.

Poses carry a unit quaternion (scalar-first, scalar >= 0) plus a translation.
Differential poses are frame-local increments: translation expressed in the
earlier frame, rotation as a rotation-vector on the principal branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_QUAT_NORM_TOL = 1e-9
_PI_BRANCH_TOL = 1e-9


class PoseError(ValueError):
    pass


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def _quat_canonical(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    n = math.sqrt(float(np.dot(q, q)))
    if not np.isfinite(n) or abs(n - 1.0) > 1e-9:
        raise PoseError(f"quaternion norm {n} is not within 1e-9 of 1")
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    # q is canonical (w >= 0) so the angle is in [0, pi].
    w = min(q[0], 1.0)
    v = q[1:4]
    s = math.sqrt(float(np.dot(v, v)))
    angle = 2.0 * math.atan2(s, w)
    if s < 1e-12:
        # small-angle: rotvec ~= 2 v / w with first-order correction
        if w < 1e-12:
            raise PoseError("rotation angle at pi: rotation-vector branch ambiguous")
        return v * (2.0 / w) * (1.0 - s * s / (3.0 * w * w))
    return v * (angle / s)


def _rotvec_to_quat(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    angle = math.sqrt(float(np.dot(r, r)))
    if angle < 1e-12:
        q = np.array([1.0, 0.5 * r[0], 0.5 * r[1], 0.5 * r[2]])
    else:
        half = 0.5 * angle
        k = math.sin(half) / angle
        q = np.array([math.cos(half), k * r[0], k * r[1], k * r[2]])
    return _quat_canonical(q)


def rotvec_to_matrix(r: np.ndarray) -> np.ndarray:
    return _quat_to_matrix(_rotvec_to_quat(r))


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return _quat_canonical(q)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: translation (m) and scalar-first unit quaternion."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        q = _quat_canonical(self.rotation)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_rotvec(translation, rotvec) -> "Pose":
        return Pose(np.asarray(translation, dtype=float), _rotvec_to_quat(np.asarray(rotvec, dtype=float)))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, 3], matrix_to_quat(m[:3, :3]))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.rotation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation_matrix.T
        return Pose(-rt @ self.translation, _quat_canonical(np.array([self.rotation[0], *(-self.rotation[1:4])])))


@dataclass(frozen=True)
class DifferentialPose:
    """Frame-local SE(3) increment between consecutive samples."""

    dtranslation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    drotation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        dt = np.asarray(self.dtranslation, dtype=float).reshape(3)
        dr = np.asarray(self.drotation, dtype=float).reshape(3)
        if np.linalg.norm(dr) >= math.pi:
            raise PoseError("differential rotation magnitude must stay below pi")
        object.__setattr__(self, "dtranslation", dt)
        object.__setattr__(self, "drotation", dr)

    @staticmethod
    def zero() -> "DifferentialPose":
        return DifferentialPose()

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dtranslation, self.drotation])

    @staticmethod
    def from_vector(v) -> "DifferentialPose":
        v = np.asarray(v, dtype=float).reshape(6)
        return DifferentialPose(v[:3], v[3:])


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.translation + a.rotation_matrix @ b.translation, _quat_mul(a.rotation, b.rotation))


def difference(earlier: Pose, later: Pose) -> DifferentialPose:
    """Frame-local increment taking `earlier` to `later`.

    Translation is expressed in the earlier frame; rotation is the
    rotation-vector of the relative rotation. A relative rotation of exactly
    pi has no unique rotation-vector and raises PoseError.
    """
    re = earlier.rotation_matrix
    dt = re.T @ (later.translation - earlier.translation)
    q_rel = _quat_canonical(
        _quat_mul(np.array([earlier.rotation[0], *(-earlier.rotation[1:4])]), later.rotation)
    )
    if q_rel[0] < _PI_BRANCH_TOL:
        raise PoseError("relative rotation angle at pi: branch ambiguous")
    return DifferentialPose(dt, _quat_to_rotvec(q_rel))


def apply(earlier: Pose, d: DifferentialPose) -> Pose:
    return Pose(
        earlier.translation + earlier.rotation_matrix @ d.dtranslation,
        _quat_mul(earlier.rotation, _rotvec_to_quat(d.drotation)),
    )


@dataclass
class GripperTrajectory:
    """Timestamped gripper pose stream with binary grasp states."""

    times: np.ndarray
    poses: list
    grasps: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.grasps = np.asarray(self.grasps, dtype=int).reshape(-1)
        if len(self.poses) < 1:
            raise ValueError("trajectory needs at least one sample")
        if not (len(self.times) == len(self.poses) == len(self.grasps)):
            raise ValueError("times, poses, grasps must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for t, pose, g in zip(self.times, self.poses, self.grasps):
                rec = {
                    "t": float(f"{t:.17g}"),
                    "p": [float(f"{v:.17g}") for v in pose.translation],
                    "q": [float(f"{v:.17g}") for v in pose.rotation],
                    "grasp": int(g),
                }
                f.write(json.dumps(rec) + "\n")

    @staticmethod
    def load_jsonl(path) -> "GripperTrajectory":
        times, poses, grasps = [], [], []
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    times.append(float(rec["t"]))
                    poses.append(Pose(np.array(rec["p"], dtype=float), np.array(rec["q"], dtype=float)))
                    grasps.append(int(rec["grasp"]))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"malformed trajectory record at line {lineno}: {exc}") from exc
        return GripperTrajectory(np.array(times), poses, np.array(grasps))


def _unwrap_rotvec(r: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Pick the rotation-vector branch of r closest to prev."""
    angle = float(np.linalg.norm(r))
    if angle < 1e-12:
        pn = float(np.linalg.norm(prev))
        if pn < 1e-12:
            return r
        axis = prev / pn
    else:
        axis = r / angle
    best = None
    best_d = None
    for n in range(-3, 4):
        cand = axis * (angle + 2.0 * math.pi * n)
        d = float(np.linalg.norm(cand - prev))
        if best_d is None or d < best_d:
            best, best_d = cand, d
    return best


def relative_positions_orientations(traj, start: int = 0, length: int | None = None):
    """Positions and unwrapped orientations relative to the window's first frame.

    Accepts a GripperTrajectory or a plain sequence of Pose. Returns
    (positions, orientations) as (T, 3) arrays with the first row at zero.
    """
    if isinstance(traj, GripperTrajectory):
        poses: Sequence[Pose] = traj.poses
    else:
        poses = traj
    if length is None:
        length = len(poses) - start
    if length < 3:
        raise ValueError("window must contain at least 3 samples")
    if start < 0 or start + length > len(poses):
        raise ValueError("window out of range")
    window = poses[start : start + length]
    base = window[0]
    r0t = base.rotation_matrix.T
    positions = np.zeros((length, 3))
    orientations = np.zeros((length, 3))
    prev = np.zeros(3)
    for k, pose in enumerate(window):
        positions[k] = r0t @ (pose.translation - base.translation)
        rel = r0t @ pose.rotation_matrix
        rv = _quat_to_rotvec(matrix_to_quat(rel))
        orientations[k] = _unwrap_rotvec(rv, prev)
        prev = orientations[k]
    return positions, orientations
