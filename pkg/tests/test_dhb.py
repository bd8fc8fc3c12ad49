import numpy as np
import pytest

from retargetkit import DifferentialPose, Pose, dhb_distance, dhb_transform, dhb_transform_with_prediction
from retargetkit.dhb import CHANNEL_NAMES, DEGENERATE_STEP_EPS, DhbInvariants
from retargetkit.se3 import _rotvec_to_quat, compose
from conftest import random_pose_window, random_rigid, transform_window

IDENT = np.array([1.0, 0.0, 0.0, 0.0])


def line_window(n=10, step=0.01):
    return [Pose(np.array([step * k, 0.0, 0.0]), IDENT) for k in range(n)]


def right_angle_window():
    """Planar L-path: 4 equal steps along +x, then 4 along +y."""
    pts = [np.array([0.01 * k, 0.0, 0.0]) for k in range(5)]
    pts += [np.array([0.04, 0.01 * k, 0.0]) for k in range(1, 5)]
    return [Pose(p, IDENT) for p in pts]


def test_channel_layout():
    inv = dhb_transform(line_window(10))
    assert inv.channels.shape == (10, 8)
    assert len(CHANNEL_NAMES) == 10
    assert CHANNEL_NAMES[0] == "m_p" and CHANNEL_NAMES[5] == "m_r"


def test_straight_line_invariants():
    inv = dhb_transform(line_window(10, step=0.01))
    assert np.max(np.abs(inv.channels[0] - 0.01)) < 1e-15  # m_p constant
    assert np.max(np.abs(inv.channels[1:5])) == 0.0  # no frame rotation
    assert np.max(np.abs(inv.channels[5:])) == 0.0  # no angular motion


def test_right_angle_turn():
    inv = dhb_transform(right_angle_window())
    turn = 3  # column where x-hat flips from +x to +y
    assert abs(inv.channels[1][turn] - 1.0) < 1e-12  # sin(theta1) = 1
    assert abs(inv.channels[2][turn]) < 1e-12  # sin(2*theta1) = 0
    others = np.delete(inv.channels[1], turn)
    assert np.max(np.abs(others)) < 1e-12


def test_rigid_invariance(rng):
    for _ in range(100):
        poses = random_pose_window(rng, 10)
        g = random_rigid(rng)
        a = dhb_transform(poses)
        b = dhb_transform(transform_window(g, poses))
        assert np.max(np.abs(a.channels - b.channels)) < 1e-9


def test_translation_scale_equivariance(rng):
    for _ in range(20):
        poses = random_pose_window(rng, 10)
        base = dhb_transform(poses)
        for s in (0.1, 2.0, 10.0):
            scaled = [Pose(s * p.translation, p.rotation) for p in poses]
            inv = dhb_transform(scaled)
            rel = np.abs(inv.channels[0] - s * base.channels[0]) / np.maximum(np.abs(s * base.channels[0]), 1e-300)
            assert np.max(rel) < 1e-12
            keep = np.delete(np.arange(10), 0)
            assert np.max(np.abs(inv.channels[keep] - base.channels[keep])) < 1e-9


def test_short_window_rejected():
    with pytest.raises(ValueError):
        dhb_transform(line_window(2))


def test_stationary_window_all_zero():
    poses = [Pose(np.array([0.5, 0.5, 0.0]), IDENT)] * 8
    inv = dhb_transform(poses)
    assert np.max(np.abs(inv.channels)) == 0.0


def test_degenerate_step_carries_frame():
    # pause in the middle of a straight line: magnitudes dip to zero but the
    # angle channels stay zero (no spurious frame rotation)
    pts = [np.array([0.01 * k, 0.0, 0.0]) for k in range(5)]
    pts.insert(3, pts[2].copy())
    poses = [Pose(p, IDENT) for p in pts]
    inv = dhb_transform(poses)
    assert np.max(np.abs(inv.channels[1:5])) == 0.0
    assert np.min(inv.channels[0]) == 0.0  # the pause column


def test_sub_threshold_step_is_degenerate():
    step = DEGENERATE_STEP_EPS * 0.5
    poses = [Pose(np.array([step * k, 0.0, 0.0]), IDENT) for k in range(6)]
    inv = dhb_transform(poses)
    assert np.max(np.abs(inv.channels[1:5])) == 0.0


def test_rotation_stream_right_angle():
    # rotation-vector path turning 90 degrees in axis space
    rvs = [np.array([0.1 * k, 0.0, 0.0]) for k in range(4)]
    rvs += [np.array([0.3, 0.1 * k, 0.0]) for k in range(1, 4)]
    poses = [Pose(np.zeros(3), _rotvec_to_quat(np.zeros(3)))]
    # build absolute orientations whose relative rotation vectors follow rvs
    poses = [Pose(np.zeros(3), _rotvec_to_quat(r)) for r in rvs]
    inv = dhb_transform(poses)
    assert np.max(inv.channels[6]) > 0.99  # sin(theta1_r) near 1 at the turn


def test_distance_zero_and_positive(rng):
    poses = random_pose_window(rng, 10)
    a = dhb_transform(poses)
    assert dhb_distance(a, a) == 0.0
    other = random_pose_window(rng, 10)
    assert dhb_distance(a, dhb_transform(other)) > 0.0


def test_distance_shape_mismatch(rng):
    a = dhb_transform(random_pose_window(rng, 10))
    b = dhb_transform(random_pose_window(rng, 9))
    with pytest.raises(ValueError):
        dhb_distance(a, b)


def test_transform_with_prediction_consistency(rng):
    from retargetkit.se3 import apply, difference

    history = random_pose_window(rng, 9)
    nxt = random_pose_window(rng, 2)[-1]
    d = difference(history[-1], nxt)
    via_pred = dhb_transform_with_prediction(history, d)
    direct = dhb_transform(history + [apply(history[-1], d)])
    assert np.max(np.abs(via_pred.channels - direct.channels)) == 0.0
    assert via_pred.channels.shape == (10, len(history) - 1)


def test_invariants_validation():
    with pytest.raises(ValueError):
        DhbInvariants(np.zeros((9, 4)))
    bad = np.zeros((10, 4))
    bad[0, 0] = -1.0
    with pytest.raises(ValueError):
        DhbInvariants(bad)
    bad = np.zeros((10, 4))
    bad[1, 0] = 1.5
    with pytest.raises(ValueError):
        DhbInvariants(bad)


def test_write_csv(tmp_path, rng):
    inv = dhb_transform(random_pose_window(rng, 10))
    path = tmp_path / "inv.csv"
    inv.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == CHANNEL_NAMES
    assert len(lines) == 1 + inv.n_columns
