import math

import numpy as np
import pytest

from retargetkit import GripperTrajectory, Pose, RobotModel, forward_kinematics
from retargetkit.kinematics import Joint, Limits
from retargetkit.se3 import _rotvec_to_quat, compose


def make_limits(dof, q=2.8, v=2.0, a=50.0):
    return Limits(
        np.full(dof, -q),
        np.full(dof, q),
        np.full(dof, v),
        np.full(dof, a),
    )


def x_offset(x):
    return Pose(np.array([x, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))


def planar_arm(v=2.0):
    """3-DOF planar arm: three revolute-z joints with 0.3/0.25/0.2 links."""
    z = np.array([0.0, 0.0, 1.0])
    joints = [
        Joint("j1", "revolute", "base", "l1", x_offset(0.0), z, make_limits(1, v=v)),
        Joint("j2", "revolute", "l1", "l2", x_offset(0.3), z, make_limits(1, v=v)),
        Joint("j3", "revolute", "l2", "l3", x_offset(0.25), z, make_limits(1, v=v)),
    ]
    return RobotModel(joints, "l3", x_offset(0.2))


def spatial_arm():
    """Mixed revolute/prismatic chain exercising out-of-plane axes."""
    joints = [
        Joint("j1", "revolute", "base", "l1", x_offset(0.0), np.array([0.0, 0.0, 1.0]), make_limits(1)),
        Joint("j2", "revolute", "l1", "l2", x_offset(0.2), np.array([0.0, 1.0, 0.0]), make_limits(1)),
        Joint("j3", "prismatic", "l2", "l3", x_offset(0.2), np.array([1.0, 0.0, 0.0]), make_limits(1, q=0.4)),
        Joint("j4", "revolute", "l3", "l4", x_offset(0.1), np.array([1.0, 0.0, 0.0]), make_limits(1)),
    ]
    return RobotModel(joints, "l4", x_offset(0.1))


def planar_base_robot():
    joints = [
        Joint("base", "planar-base", "world", "chassis", Pose.identity(), np.zeros(3), make_limits(3, q=5.0)),
        Joint("j1", "revolute", "chassis", "l1", x_offset(0.1), np.array([0.0, 0.0, 1.0]), make_limits(1)),
    ]
    return RobotModel(joints, "l1", x_offset(0.2))


def floating_base_robot():
    joints = [
        Joint("base", "floating-base", "world", "body", Pose.identity(), np.zeros(3), make_limits(6, q=2.0)),
        Joint("j1", "revolute", "body", "l1", x_offset(0.15), np.array([0.0, 1.0, 0.0]), make_limits(1)),
        Joint("j2", "revolute", "l1", "l2", x_offset(0.2), np.array([0.0, 0.0, 1.0]), make_limits(1)),
        Joint("j3", "prismatic", "l2", "l3", x_offset(0.1), np.array([0.0, 0.0, 1.0]), make_limits(1, q=0.3)),
    ]
    return RobotModel(joints, "l3", x_offset(0.05))


def random_pose_window(rng, length, step=0.05, rot_step=0.1):
    """Smooth random pose window: bounded translation/rotation increments."""
    poses = [Pose(rng.normal(scale=0.3, size=3), _rotvec_to_quat(rng.normal(scale=0.4, size=3)))]
    for _ in range(length - 1):
        dp = rng.normal(scale=step, size=3)
        dr = rng.normal(scale=rot_step, size=3)
        step_pose = Pose(dp, _rotvec_to_quat(dr))
        poses.append(compose(poses[-1], step_pose))
    return poses


def random_rigid(rng):
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    return Pose(rng.normal(scale=2.0, size=3), q)


def transform_window(g, poses):
    return [compose(g, p) for p in poses]


def circle_trajectory(model, q0, radius=0.1, freq=0.05, n_setpoints=220, center=None):
    """Planar circle command stream inside the arm workspace, constant yaw."""
    x0 = forward_kinematics(model, q0)
    if center is None:
        center = np.array([0.45, 0.10, 0.0])
    times = np.arange(n_setpoints) / 10.0
    poses = []
    for t in times:
        ang = 2.0 * math.pi * freq * t
        p = center + np.array([radius * math.cos(ang), radius * math.sin(ang), 0.0])
        poses.append(Pose(p, x0.rotation))
    return GripperTrajectory(times, poses, [0] * n_setpoints)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
