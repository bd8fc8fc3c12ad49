"""Motion-invariant descriptor of pose windows.

A window of T poses is reduced to a 10 x (T-2) channel matrix: per-step
translation/rotation magnitudes plus sine-encoded frame-rotation angles for
the linear and angular streams. The descriptor is unchanged by any rigid
transform applied to the whole window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .se3 import DifferentialPose, Pose, apply, relative_positions_orientations

DEGENERATE_STEP_EPS = 1e-8

CHANNEL_NAMES = [
    "m_p",
    "sin_theta1_p",
    "sin_2theta1_p",
    "sin_theta2_p",
    "sin_2theta2_p",
    "m_r",
    "sin_theta1_r",
    "sin_2theta1_r",
    "sin_theta2_r",
    "sin_2theta2_r",
]

_BASIS = np.eye(3)


@dataclass(frozen=True)
class DhbInvariants:
    """10 x (T-2) invariant channels, rows ordered as CHANNEL_NAMES."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 2 or ch.shape[0] != 10:
            raise ValueError("channels must be a 10 x (T-2) matrix")
        if not np.all(np.isfinite(ch)):
            raise ValueError("channels must be finite")
        if np.any(ch[0] < 0) or np.any(ch[5] < 0):
            raise ValueError("magnitude rows must be nonnegative")
        sines = ch[[1, 2, 3, 4, 6, 7, 8, 9]]
        if np.any(np.abs(sines) > 1.0 + 1e-12):
            raise ValueError("sine rows must lie in [-1, 1]")
        object.__setattr__(self, "channels", ch)

    @property
    def n_columns(self) -> int:
        return self.channels.shape[1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CHANNEL_NAMES)
            for col in self.channels.T:
                writer.writerow([f"{v:.17g}" for v in col])


def _initial_frame(deltas: np.ndarray):
    """Start frame when the first step is degenerate: axis permutation from
    the first nonzero step, identity axes if the window never moves."""
    for d in deltas:
        if np.linalg.norm(d) >= DEGENERATE_STEP_EPS:
            i = int(np.argmax(np.abs(d)))
            return _BASIS[i].copy(), _BASIS[(i + 1) % 3].copy()
    return _BASIS[0].copy(), _BASIS[1].copy()


def _stream_invariants(deltas: np.ndarray):
    """Magnitudes and frame-rotation angles for one stream of step vectors.

    deltas has shape (n, 3) with n = T-1; returns (m, theta1, theta2) where
    m has length n and the angles have length n-1 (one per output column).
    """
    n = deltas.shape[0]
    m = np.linalg.norm(deltas, axis=1)
    degenerate = m < DEGENERATE_STEP_EPS

    xs = np.zeros((n, 3))
    have_prev = False
    prev_x = None
    prev_y = None
    carried = np.zeros(n, dtype=bool)
    init_x, init_y = _initial_frame(deltas)
    for k in range(n):
        if degenerate[k]:
            if have_prev:
                xs[k] = prev_x
            else:
                xs[k] = init_x
            carried[k] = True
        else:
            xs[k] = deltas[k] / m[k]
            have_prev = True
        prev_x = xs[k]

    ys = np.zeros((n, 3))
    prev_y = init_y if carried[0] else None
    for k in range(n):
        if k < n - 1 and not (degenerate[k] or degenerate[k + 1]):
            c = np.cross(xs[k], xs[k + 1])
            cn = np.linalg.norm(c)
        else:
            cn = 0.0
        if cn >= DEGENERATE_STEP_EPS:
            y = c / cn
        elif prev_y is not None:
            y = prev_y
        else:
            # deterministic perpendicular: basis vector least aligned with x
            dots = np.abs(_BASIS @ xs[k])
            e = _BASIS[int(np.argmin(dots))]
            y = np.cross(xs[k], e)
            y = y / np.linalg.norm(y)
        if prev_y is not None and float(np.dot(y, prev_y)) < 0.0:
            y = -y
        ys[k] = y
        prev_y = y

    theta1 = np.zeros(n - 1)
    theta2 = np.zeros(n - 1)
    for k in range(n - 1):
        if degenerate[k] or degenerate[k + 1]:
            continue
        theta1[k] = math.atan2(float(np.dot(np.cross(xs[k], xs[k + 1]), ys[k])), float(np.dot(xs[k], xs[k + 1])))
        theta2[k] = math.atan2(
            float(np.dot(np.cross(ys[k], ys[k + 1]), xs[k + 1])), float(np.dot(ys[k], ys[k + 1]))
        )
    return m, theta1, theta2


def dhb_transform(poses) -> DhbInvariants:
    """Invariant channels of a window of at least 3 poses."""
    poses = list(poses)
    if len(poses) < 3:
        raise ValueError("window must contain at least 3 poses")
    p, r = relative_positions_orientations(poses)
    dp = np.diff(p, axis=0)
    dr = np.diff(r, axis=0)
    m_p, t1_p, t2_p = _stream_invariants(dp)
    m_r, t1_r, t2_r = _stream_invariants(dr)
    cols = len(poses) - 2
    ch = np.vstack(
        [
            m_p[:cols],
            np.sin(t1_p),
            np.sin(2.0 * t1_p),
            np.sin(t2_p),
            np.sin(2.0 * t2_p),
            m_r[:cols],
            np.sin(t1_r),
            np.sin(2.0 * t1_r),
            np.sin(t2_r),
            np.sin(2.0 * t2_r),
        ]
    )
    return DhbInvariants(ch)


def dhb_transform_with_prediction(history, predicted: DifferentialPose) -> DhbInvariants:
    """Transform of the history window extended by one predicted increment."""
    history = list(history)
    if len(history) < 3:
        raise ValueError("history must contain at least 3 poses")
    extended = history + [apply(history[-1], predicted)]
    return dhb_transform(extended)


def dhb_distance(a: DhbInvariants, b: DhbInvariants) -> float:
    """Sum of squared channel-wise differences."""
    if a.channels.shape != b.channels.shape:
        raise ValueError("invariant shapes differ")
    d = a.channels - b.channels
    return float(np.sum(d * d))
