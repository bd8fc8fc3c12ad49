"""Closed-loop retargeting of a low-rate gripper setpoint stream into
high-rate joint commands, with a first-order-lag + pure-delay joint plant
and tracking metrics for comparing embodiments."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dhb import dhb_distance, dhb_transform
from .ik import ConstraintSet, build_tasks, solve_esns
from .kinematics import JointState, RobotModel, forward_kinematics, velocity_bounds
from .se3 import DifferentialPose, GripperTrajectory, Pose, apply, difference


class PipelineError(RuntimeError):
    pass


class IkInfeasibleError(PipelineError):
    def __init__(self, tick: int):
        super().__init__(f"IK infeasible at tick {tick}")
        self.tick = tick


@dataclass
class PipelineConfig:
    policy_rate: float = 10.0
    ik_rate: float = 100.0
    k_grip: np.ndarray = field(default_factory=lambda: np.full(6, 10.0))
    k_bias: float | np.ndarray = 1.0
    h_diag: np.ndarray | None = None
    q_bias: np.ndarray | None = None
    tau: float | np.ndarray = 0.0
    delay_ticks: int = 0

    def __post_init__(self):
        if self.policy_rate <= 0 or self.ik_rate <= 0:
            raise ValueError("rates must be positive")
        ratio = self.ik_rate / self.policy_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("ik_rate must be an integer multiple of policy_rate")
        if np.any(np.asarray(self.tau, dtype=float) < 0):
            raise ValueError("latency time constant must be nonnegative")
        if self.delay_ticks < 0:
            raise ValueError("delay must be nonnegative")
        self.k_grip = np.broadcast_to(np.asarray(self.k_grip, dtype=float), (6,)).copy()

    @property
    def ticks_per_setpoint(self) -> int:
        return int(round(self.ik_rate / self.policy_rate))

    @staticmethod
    def from_dict(doc: dict) -> "PipelineConfig":
        kwargs = {}
        for key in ("policy_rate", "ik_rate", "k_bias", "tau", "delay_ticks"):
            if key in doc:
                kwargs[key] = doc[key]
        for key in ("k_grip", "h_diag", "q_bias"):
            if key in doc and doc[key] is not None:
                kwargs[key] = np.asarray(doc[key], dtype=float)
        if "tau" in kwargs and isinstance(kwargs["tau"], list):
            kwargs["tau"] = np.asarray(kwargs["tau"], dtype=float)
        if "delay_ticks" in kwargs:
            kwargs["delay_ticks"] = int(kwargs["delay_ticks"])
        return PipelineConfig(**kwargs)

    @staticmethod
    def load(path) -> "PipelineConfig":
        text = open(path, "rb").read()
        if str(path).endswith(".toml"):
            import tomli

            doc = tomli.loads(text.decode())
        else:
            doc = json.loads(text.decode())
        return PipelineConfig.from_dict(doc)


@dataclass
class TickRecord:
    t: float
    q: np.ndarray
    qdot: np.ndarray
    c1: float
    saturated: list


@dataclass
class RetargetReport:
    ticks: list
    position_errors: np.ndarray  # per setpoint, meters
    orientation_errors: np.ndarray  # per setpoint, radians
    summary: dict

    def write(self, jsonl_path, summary_path) -> None:
        with open(jsonl_path, "w") as f:
            for rec in self.ticks:
                f.write(
                    json.dumps(
                        {
                            "t": float(f"{rec.t:.17g}"),
                            "q": [float(f"{v:.17g}") for v in rec.q],
                            "qdot": [float(f"{v:.17g}") for v in rec.qdot],
                            "c1": float(f"{rec.c1:.17g}"),
                            "saturated": rec.saturated,
                        }
                    )
                    + "\n"
                )
        with open(summary_path, "w") as f:
            json.dump(self.summary, f, indent=2)
            f.write("\n")


def _plant_step(qdot_actual, qdot_cmd, tau, dt):
    """First-order lag toward the (already delayed) commanded velocity."""
    tau = np.broadcast_to(np.asarray(tau, dtype=float), qdot_actual.shape)
    gain = np.where(tau > 0, 1.0 - np.exp(-dt / np.maximum(tau, 1e-300)), 1.0)
    return qdot_actual + gain * (qdot_cmd - qdot_actual)


def run_pipeline(model: RobotModel, config: PipelineConfig, commands: GripperTrajectory, q0=None) -> RetargetReport:
    """Track each held setpoint with scaled prioritized IK, drive the joint
    plant, and integrate. Joint limits are enforced at every tick."""
    if len(commands) < 1:
        raise ValueError("command stream is empty")
    n = model.n_j
    q_min, q_max, v_max, _ = model.limit_arrays()
    if q0 is None:
        q = np.where(np.isfinite(q_min + q_max), 0.5 * (q_min + q_max), 0.0)
    else:
        q = np.asarray(q0, dtype=float).reshape(n).copy()
    q_bias = config.q_bias if config.q_bias is not None else q.copy()
    q_bias = np.asarray(q_bias, dtype=float).reshape(n)
    h = np.diag(config.h_diag) if config.h_diag is not None else np.eye(n)

    dt = 1.0 / config.ik_rate
    per = config.ticks_per_setpoint
    total_ticks = len(commands) * per
    qdot = np.zeros(n)
    cmd_queue = deque(np.zeros(n) for _ in range(config.delay_ticks))

    ticks = []
    pos_err = np.zeros(len(commands))
    ori_err = np.zeros(len(commands))
    violations = 0
    scaled_ticks = 0
    for tick in range(total_ticks):
        sp_index = min(tick // per, len(commands) - 1)
        x_des = commands.poses[sp_index]
        state = JointState(q, qdot)
        lower, upper = velocity_bounds(model, state, dt)
        tasks = build_tasks(model, q, x_des, q_bias, config.k_grip, config.k_bias)
        sol = solve_esns(tasks, ConstraintSet(lower, upper), h)
        if sol.status == "infeasible":
            raise IkInfeasibleError(tick)
        c1 = sol.scales[0] if sol.scales else 0.0
        if c1 < 1.0 - 1e-9:
            scaled_ticks += 1
        cmd = sol.a
        if config.delay_ticks > 0:
            cmd_queue.append(cmd)
            cmd = cmd_queue.popleft()
        qdot = _plant_step(qdot, cmd, config.tau, dt)
        # the joint controller enforces its own envelope on the realized
        # velocity, so lag and delay can never push a joint past its stops
        qdot = np.clip(qdot, np.maximum(-v_max, (q_min - q) / dt), np.minimum(v_max, (q_max - q) / dt))
        q = q + dt * qdot
        over = np.maximum(q - q_max, q_min - q)
        if np.any(over > 1e-9):
            violations += 1
        q = np.clip(q, q_min, q_max)
        saturated = [int(i) for i in range(n) if qdot[i] <= lower[i] + 1e-12 or qdot[i] >= upper[i] - 1e-12]
        ticks.append(TickRecord(t=tick * dt, q=q.copy(), qdot=qdot.copy(), c1=float(c1), saturated=saturated))
        if (tick + 1) % per == 0 or tick == total_ticks - 1:
            x_cur = forward_kinematics(model, q)
            e_p = float(np.linalg.norm(x_des.translation - x_cur.translation))
            rel = x_des.rotation_matrix @ x_cur.rotation_matrix.T
            e_r = float(math.acos(min(1.0, max(-1.0, (np.trace(rel) - 1.0) / 2.0))))
            pos_err[sp_index] = e_p
            ori_err[sp_index] = e_r
    summary = {
        "ticks": total_ticks,
        "max_position_error": float(np.max(pos_err)),
        "mean_position_error": float(np.mean(pos_err)),
        "max_orientation_error": float(np.max(ori_err)),
        "mean_orientation_error": float(np.mean(ori_err)),
        "limit_violations": int(violations),
        "fraction_scaled": float(scaled_ticks / total_ticks),
    }
    if violations != 0:
        raise PipelineError(f"joint limits violated on {violations} ticks")
    return RetargetReport(ticks, pos_err, ori_err, summary)


def relay_setpoints(commands: GripperTrajectory, as_differential: bool = True):
    """Convert an absolute pose stream to frame-local increments (and back).

    With as_differential=True, returns the list of per-step differentials;
    otherwise returns the absolute pose list unchanged (identity relay).
    """
    if len(commands) < 2:
        raise ValueError("need at least two samples to form differentials")
    if not as_differential:
        return list(commands.poses)
    return [difference(a, b) for a, b in zip(commands.poses[:-1], commands.poses[1:])]


def reconstruct_setpoints(start: Pose, differentials) -> list:
    """Inverse of relay_setpoints: rebuild the absolute pose stream."""
    poses = [start]
    for d in differentials:
        poses.append(apply(poses[-1], d))
    return poses


def compare_embodiments(models, configs, commands: GripperTrajectory, names=None):
    """Run the same command stream through several embodiments.

    Returns one row per model with the tracking summary and the
    invariant-space distance between the commanded and realized gripper
    trajectories; failures are reported in-row without stopping the rest.
    """
    if len(models) < 2:
        raise ValueError("need at least two models to compare")
    if len(configs) != len(models):
        raise ValueError("one config per model required")
    if names is None:
        names = [f"model_{i}" for i in range(len(models))]
    per = None
    rows = []
    cmd_inv = dhb_transform(commands.poses) if len(commands) >= 3 else None
    for name, model, config in zip(names, models, configs):
        row = {"name": name}
        try:
            report = run_pipeline(model, config, commands)
            per = config.ticks_per_setpoint
            realized = []
            for k in range(len(commands)):
                rec = report.ticks[min((k + 1) * per - 1, len(report.ticks) - 1)]
                realized.append(forward_kinematics(model, rec.q))
            row.update(report.summary)
            if cmd_inv is not None:
                row["dhb_distance"] = float(dhb_distance(cmd_inv, dhb_transform(realized)))
        except Exception as exc:  # keep the remaining models running
            row["error"] = str(exc)
        rows.append(row)
    return rows


def comparison_to_csv(rows, path) -> None:
    import csv

    keys = ["name"]
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            out = {}
            for k, v in row.items():
                out[k] = f"{v:.17g}" if isinstance(v, float) else v
            writer.writerow(out)
