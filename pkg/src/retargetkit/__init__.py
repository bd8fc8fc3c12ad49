"""Motion retargeting and motion-invariant analysis toolkit.

Converts handheld-gripper trajectory commands into whole-body joint motions
for kinematic-tree robots via prioritized, constraint-aware differential
inverse kinematics, and provides the invariant trajectory transform and
imitation-loss evaluators built on it.
"""

from .se3 import (
    DifferentialPose,
    GripperTrajectory,
    Pose,
    apply,
    compose,
    difference,
    relative_positions_orientations,
)
from .dhb import DhbInvariants, dhb_distance, dhb_transform, dhb_transform_with_prediction
from .kinematics import JointState, RobotModel, forward_kinematics, jacobian, velocity_bounds
from .ik import ConstraintSet, IkSolution, TaskSpec, build_tasks, solve_esns, solve_reference_qp
from .losses import (
    GmmParams,
    LossBreakdown,
    gmm_nll,
    grasp_ce,
    invariant_loss_sequence,
    invariant_loss_step,
    total_loss,
)
from .retarget import (
    PipelineConfig,
    RetargetReport,
    compare_embodiments,
    reconstruct_setpoints,
    relay_setpoints,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "DifferentialPose",
    "GripperTrajectory",
    "Pose",
    "apply",
    "compose",
    "difference",
    "relative_positions_orientations",
    "DhbInvariants",
    "dhb_distance",
    "dhb_transform",
    "dhb_transform_with_prediction",
    "JointState",
    "RobotModel",
    "forward_kinematics",
    "jacobian",
    "velocity_bounds",
    "ConstraintSet",
    "IkSolution",
    "TaskSpec",
    "build_tasks",
    "solve_esns",
    "solve_reference_qp",
    "GmmParams",
    "LossBreakdown",
    "gmm_nll",
    "grasp_ce",
    "invariant_loss_sequence",
    "invariant_loss_step",
    "total_loss",
    "PipelineConfig",
    "RetargetReport",
    "compare_embodiments",
    "reconstruct_setpoints",
    "relay_setpoints",
    "run_pipeline",
]
