"""Batch command-line front end.

Exit codes: 0 success, 1 input or parse error, 2 solver infeasibility.
All numeric output is printed with 17 significant digits so reruns are
byte-identical. Set RETARGETKIT_LOG=debug|info|warning for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dhb, losses, retarget
from .ik import ConstraintSet, build_tasks, solve_esns
from .kinematics import JointState, ModelError, RobotModel, forward_kinematics, velocity_bounds
from .se3 import DifferentialPose, GripperTrajectory, Pose, PoseError

log = logging.getLogger("retargetkit")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2


def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def _out_dir(args) -> Path:
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_retarget(args) -> int:
    model = RobotModel.load_json(args.model)
    config = retarget.PipelineConfig.load(args.config) if args.config else retarget.PipelineConfig()
    commands = GripperTrajectory.load_jsonl(args.trajectory)
    out = _out_dir(args)
    try:
        report = retarget.run_pipeline(model, config, commands)
    except retarget.IkInfeasibleError as exc:
        print(f"IK infeasible at tick {exc.tick}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report.write(out / "report.jsonl", out / "summary.json")
    log.info("wrote %s and %s", out / "report.jsonl", out / "summary.json")
    return EXIT_OK


def cmd_invariants(args) -> int:
    traj = GripperTrajectory.load_jsonl(args.trajectory)
    T = args.window
    if T < 3:
        raise ValueError("window must be at least 3")
    if T > len(traj):
        raise ValueError(f"window {T} longer than trajectory ({len(traj)} samples)")
    out = _out_dir(args) / "invariants.csv"
    if args.single_window:
        dhb.dhb_transform(traj.poses[:T]).write_csv(out)
    else:
        import csv

        with open(out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["window_start"] + dhb.CHANNEL_NAMES)
            for start in range(len(traj) - T + 1):
                inv = dhb.dhb_transform(traj.poses[start : start + T])
                for col in inv.channels.T:
                    writer.writerow([start] + [f"{v:.17g}" for v in col])
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_compare(args) -> int:
    ta = GripperTrajectory.load_jsonl(args.trajectory_a)
    tb = GripperTrajectory.load_jsonl(args.trajectory_b)
    T = args.window if args.window else min(len(ta), len(tb))
    if T < 3 or T > len(ta) or T > len(tb):
        raise ValueError("window must be at least 3 and fit both trajectories")
    d = dhb.dhb_distance(dhb.dhb_transform(ta.poses[:T]), dhb.dhb_transform(tb.poses[:T]))
    print(json.dumps({"distance": _fmt(d), "window": T}))
    return EXIT_OK


def cmd_ik_solve(args) -> int:
    model = RobotModel.load_json(args.model)
    q0 = np.asarray(json.loads(args.q0), dtype=float)
    target = json.loads(args.target)
    x_des = Pose(np.asarray(target["p"], dtype=float), np.asarray(target["q"], dtype=float))
    dt = args.dt
    state = JointState(q0, np.zeros_like(q0))
    lower, upper = velocity_bounds(model, state, dt)
    tasks = build_tasks(model, q0, x_des, q0, np.full(6, args.k_grip), args.k_bias)
    sol = solve_esns(tasks, ConstraintSet(lower, upper))
    if sol.status == "infeasible":
        print("IK constraint set infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = {
        "a": [_fmt(v) for v in sol.a],
        "scales": [_fmt(c) for c in sol.scales],
        "status": sol.status,
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_loss_eval(args) -> int:
    with open(args.params) as f:
        doc = json.load(f)
    gmm = doc["gmm"]
    params = losses.GmmParams(
        np.asarray(gmm["weight_logits"], dtype=float),
        np.asarray(gmm["means"], dtype=float),
        np.asarray(gmm["stds"], dtype=float),
    )
    predicted = DifferentialPose(
        np.asarray(doc["predicted"]["dp"], dtype=float), np.asarray(doc["predicted"]["dr"], dtype=float)
    )
    grasp_logit = float(doc["grasp_logit"])
    episode = GripperTrajectory.load_jsonl(args.episode)
    if len(episode) < 4:
        raise ValueError("episode needs at least 4 samples (history of 3 plus the demo step)")
    from .se3 import difference

    history = episode.poses[:-1]
    demo = difference(episode.poses[-2], episode.poses[-1])
    label = int(episode.grasps[-1])
    breakdown = losses.total_loss(params, history, predicted, demo, grasp_logit, label)
    print(
        json.dumps(
            {
                "nll": _fmt(breakdown.nll),
                "invar": _fmt(breakdown.invar),
                "ce": _fmt(breakdown.ce),
                "total": _fmt(breakdown.total),
            }
        )
    )
    return EXIT_OK


def cmd_compare_embodiments(args) -> int:
    models = [RobotModel.load_json(p) for p in args.models]
    if args.config:
        config = retarget.PipelineConfig.load(args.config)
    else:
        config = retarget.PipelineConfig()
    commands = GripperTrajectory.load_jsonl(args.trajectory)
    names = [Path(p).stem for p in args.models]
    rows = retarget.compare_embodiments(models, [config] * len(models), commands, names=names)
    out = _out_dir(args) / "comparison.csv"
    retarget.comparison_to_csv(rows, out)
    log.info("wrote %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retargetkit", description=__doc__)
    parser.add_argument("--config", default=None, help="pipeline config file (JSON or TOML)")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized commands")
    parser.add_argument("--output-dir", default=".", help="directory for output files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retarget", help="run the retargeting pipeline on a command stream")
    p.add_argument("model")
    p.add_argument("trajectory")
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("invariants", help="export invariant channels of a trajectory")
    p.add_argument("trajectory")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--single-window", action="store_true")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("compare", help="invariant-space distance between two trajectories")
    p.add_argument("trajectory_a")
    p.add_argument("trajectory_b")
    p.add_argument("--window", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ik-solve", help="one scaled IK solve toward a target pose")
    p.add_argument("model")
    p.add_argument("--target", required=True, help='JSON pose {"p": [..], "q": [w,x,y,z]}')
    p.add_argument("--q0", required=True, help="JSON list, start configuration")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--k-grip", type=float, default=10.0)
    p.add_argument("--k-bias", type=float, default=1.0)
    p.set_defaults(func=cmd_ik_solve)

    p = sub.add_parser("loss-eval", help="evaluate the loss breakdown for one episode")
    p.add_argument("params")
    p.add_argument("episode")
    p.set_defaults(func=cmd_loss_eval)

    p = sub.add_parser("compare-embodiments", help="run one command stream on several models")
    p.add_argument("trajectory")
    p.add_argument("models", nargs="+")
    p.set_defaults(func=cmd_compare_embodiments)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RETARGETKIT_LOG", "warning").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except (ValueError, ModelError, PoseError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
