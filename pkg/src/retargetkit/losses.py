"""Imitation-loss evaluators: mixture negative log-likelihood over SE(3)
increments, invariant-space regularization, and grasp cross-entropy.

Evaluation only; gradients for verification come from finite differences
in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dhb import dhb_distance, dhb_transform, dhb_transform_with_prediction
from .se3 import DifferentialPose, apply

STD_FLOOR = 1e-4
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class GmmParams:
    """Diagonal Gaussian mixture over 6-vector pose increments."""

    weight_logits: np.ndarray
    means: np.ndarray  # (K, 6)
    stds: np.ndarray  # (K, 6), floored at STD_FLOOR

    def __post_init__(self):
        self.weight_logits = np.asarray(self.weight_logits, dtype=float).reshape(-1)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.stds = np.atleast_2d(np.asarray(self.stds, dtype=float))
        k = self.weight_logits.shape[0]
        if k < 1:
            raise ValueError("mixture needs at least one mode")
        if self.means.shape != (k, 6) or self.stds.shape != (k, 6):
            raise ValueError("means and stds must be (K, 6)")
        self.stds = np.maximum(self.stds, STD_FLOOR)

    @staticmethod
    def single_mode(mean=None, std=1.0) -> "GmmParams":
        mean = np.zeros(6) if mean is None else np.asarray(mean, dtype=float)
        return GmmParams(np.zeros(1), mean.reshape(1, 6), np.full((1, 6), float(std)))


@dataclass
class LossBreakdown:
    nll: float
    invar: float
    ce: float
    total: float


def gmm_nll(params: GmmParams, target: DifferentialPose) -> float:
    """Negative log-likelihood of the increment under the mixture,
    evaluated with log-sum-exp stability."""
    x = target.as_vector()
    z = (x[None, :] - params.means) / params.stds
    log_comp = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(params.stds), axis=1) - 3.0 * _LOG_2PI
    w = params.weight_logits - np.max(params.weight_logits)
    log_w = w - math.log(float(np.sum(np.exp(w))))
    terms = log_w + log_comp
    peak = float(np.max(terms))
    return -(peak + math.log(float(np.sum(np.exp(terms - peak)))))


def grasp_ce(logit: float, label: int) -> float:
    """Binary cross-entropy with logits, stable for large |logit|."""
    z = float(logit)
    y = float(label)
    return max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))


def invariant_loss_step(history, predicted: DifferentialPose, demo: DifferentialPose) -> float:
    """Invariant-space L2 gap between a predicted and a demonstrated step
    appended to the same history window."""
    return dhb_distance(
        dhb_transform_with_prediction(history, predicted),
        dhb_transform_with_prediction(history, demo),
    )


def invariant_loss_sequence(history, predicted_seq, demo_seq) -> float:
    """Receding-horizon variant: both increment sequences extend the history
    and the transforms of the two extended windows are compared."""
    predicted_seq = list(predicted_seq)
    demo_seq = list(demo_seq)
    if len(predicted_seq) != len(demo_seq):
        raise ValueError("prediction and demonstration horizons differ")
    if len(predicted_seq) < 1:
        raise ValueError("horizon must contain at least one step")
    if len(predicted_seq) == 1:
        return invariant_loss_step(history, predicted_seq[0], demo_seq[0])

    def extend(seq):
        poses = list(history)
        for d in seq:
            poses.append(apply(poses[-1], d))
        return poses

    return dhb_distance(dhb_transform(extend(predicted_seq)), dhb_transform(extend(demo_seq)))


def total_loss(params, history, predicted, demo, grasp_logit, grasp_label) -> LossBreakdown:
    """Unweighted sum of the three loss terms."""
    nll = gmm_nll(params, predicted)
    invar = invariant_loss_step(history, predicted, demo)
    ce = grasp_ce(grasp_logit, grasp_label)
    return LossBreakdown(nll=nll, invar=invar, ce=ce, total=nll + invar + ce)
