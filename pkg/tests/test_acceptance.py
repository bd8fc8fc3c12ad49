"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Every test computes its measurements first, prints a single summary line
(visible even under pytest capture), and only then asserts, so a failing
run still reports the measured values for all criteria that executed.
"""

import json
import math
import time

import numpy as np
import pytest

from retargetkit import (
    ConstraintSet,
    DifferentialPose,
    GmmParams,
    GripperTrajectory,
    PipelineConfig,
    Pose,
    TaskSpec,
    dhb_distance,
    dhb_transform,
    forward_kinematics,
    gmm_nll,
    grasp_ce,
    invariant_loss_sequence,
    invariant_loss_step,
    jacobian,
    run_pipeline,
    solve_esns,
    solve_reference_qp,
)
from retargetkit.cli import main
from retargetkit.se3 import compose

from conftest import (
    circle_trajectory,
    floating_base_robot,
    planar_arm,
    planar_base_robot,
    random_pose_window,
    random_rigid,
    spatial_arm,
    transform_window,
)
from test_dhb import right_angle_window
from test_ik import random_instance
from test_kinematics import fd_jacobian
from test_losses import naive_ce, naive_gmm_nll, random_diff

Q0 = np.array([0.3, 0.6, 0.4])


def report(capsys, num, label, ok, detail):
    with capsys.disabled():
        print(f"[criterion {num:2d}] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num}: {label} — {detail}"


def test_criterion_01_dhb_rigid_invariance(capsys):
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        poses = random_pose_window(rng, 10)
        g = random_rigid(rng)
        a = dhb_transform(poses).channels
        b = dhb_transform(transform_window(g, poses)).channels
        worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    report(capsys, 1, "DHB rigid invariance (1000 windows)", ok, f"max dev={worst:.3e}, {elapsed:.2f}s")


def test_criterion_02_dhb_scale_behavior(capsys):
    rng = np.random.default_rng(1002)
    worst_rel, worst_other = 0.0, 0.0
    for _ in range(50):
        poses = random_pose_window(rng, 10)
        base = dhb_transform(poses).channels
        for s in (0.1, 2.0, 10.0):
            scaled = dhb_transform([Pose(s * p.translation, p.rotation) for p in poses]).channels
            rel = np.abs(scaled[0] - s * base[0]) / np.maximum(np.abs(s * base[0]), 1e-300)
            worst_rel = max(worst_rel, float(np.max(rel)))
            worst_other = max(worst_other, float(np.max(np.abs(scaled[1:] - base[1:]))))
    ok = worst_rel <= 1e-12 and worst_other <= 1e-9
    report(capsys, 2, "DHB scale equivariance", ok, f"m_p rel={worst_rel:.3e}, other rows={worst_other:.3e}")


def test_criterion_03_right_angle_fixture(capsys):
    inv = dhb_transform(right_angle_window())
    turn = 3
    e1 = abs(inv.channels[1][turn] - 1.0)
    e2 = abs(inv.channels[2][turn])
    ok = e1 <= 1e-12 and e2 <= 1e-12
    report(capsys, 3, "L-path right-angle channels", ok, f"|sin t1 - 1|={e1:.3e}, |sin 2t1|={e2:.3e}")


def test_criterion_04_jacobian_fd(capsys):
    rng = np.random.default_rng(1004)
    models = [planar_arm(), spatial_arm(), planar_base_robot(), floating_base_robot()]
    worst = 0.0
    for _ in range(250):
        for model in models:
            q_min, q_max, _, _ = model.limit_arrays()
            q = rng.uniform(np.maximum(q_min, -1.2), np.minimum(q_max, 1.2))
            worst = max(worst, float(np.max(np.abs(jacobian(model, q) - fd_jacobian(model, q)))))
    ok = worst <= 1e-6
    report(capsys, 4, "Jacobian vs finite differences (1000 configs)", ok, f"max dev={worst:.3e}")


def test_criterion_05_esns_vs_reference(capsys):
    rng = np.random.default_rng(1005)
    t0 = time.perf_counter()
    worst_da, worst_dc, n_viol = 0.0, 0.0, 0
    # "zero violations" is checked against the solver feasibility tolerance:
    # floating-point QP outputs carry O(1e-10) slack on general linear rows
    feas_tol = 1e-9
    for _ in range(500):
        tasks, cons, H = random_instance(rng)
        s1 = solve_esns(tasks, cons, H)
        s2 = solve_reference_qp(tasks, cons, H)
        worst_da = max(worst_da, float(np.max(np.abs(s1.a - s2.a))))
        worst_dc = max(worst_dc, abs(s1.scales[0] - s2.scales[0]))
        C, lo, hi = cons.rows(H.shape[0])
        for a in (s1.a, s2.a):
            viol = max(float(np.max(C @ a - hi)), float(np.max(lo - C @ a)))
            if viol > feas_tol:
                n_viol += 1
    elapsed = time.perf_counter() - t0
    ok = worst_da <= 1e-6 and worst_dc <= 1e-6 and n_viol == 0 and elapsed < 30.0
    report(
        capsys,
        5,
        "eSNS vs reference QP (500 instances)",
        ok,
        f"max|da|={worst_da:.3e}, max|dc1|={worst_dc:.3e}, violations={n_viol}, {elapsed:.1f}s",
    )


def test_criterion_06_double_speed_scale(capsys):
    tasks = [TaskSpec(1, np.array([[1.0]]), np.array([2.0]))]
    sol = solve_esns(tasks, ConstraintSet(np.array([-1.0]), np.array([1.0])))
    dc = abs(sol.scales[0] - 0.5)
    direction_ok = sol.a[0] > 0.0 and abs(sol.a[0] - 1.0) <= 1e-9
    ok = dc <= 1e-9 and direction_ok
    report(capsys, 6, "1-DOF double-speed scale", ok, f"|c1-0.5|={dc:.3e}, a={sol.a[0]:.12g}")


def test_criterion_07_pipeline_safety(capsys):
    total_viol = 0
    configs = [
        (planar_arm(), PipelineConfig()),
        (planar_arm(), PipelineConfig(delay_ticks=10, tau=0.1)),
        (planar_arm(v=0.6), PipelineConfig(delay_ticks=10, tau=0.1)),
        (planar_arm(v=0.6), PipelineConfig(delay_ticks=5, tau=0.05)),
    ]
    for model, cfg in configs:
        cmds = circle_trajectory(model, Q0, n_setpoints=80)
        rep = run_pipeline(model, cfg, cmds, q0=Q0)
        total_viol += rep.summary["limit_violations"]
        q_min, q_max, v_max, _ = model.limit_arrays()
        for rec in rep.ticks:
            assert np.all(rec.q >= q_min - 1e-12) and np.all(rec.q <= q_max + 1e-12)
            assert np.all(np.abs(rec.qdot) <= v_max + 1e-12)
    ok = total_viol == 0
    report(capsys, 7, "pipeline joint-limit safety (incl. delay 10, tau 0.1)", ok, f"violations={total_viol}")


def test_criterion_08_pipeline_tracking(capsys):
    t0 = time.perf_counter()
    model = planar_arm()
    freq = 0.05
    cmds = circle_trajectory(model, Q0, radius=0.1, freq=freq, n_setpoints=120)
    rep = run_pipeline(model, PipelineConfig(), cmds, q0=Q0)
    # discrete closed-loop oracle: per-tick contraction rho = 1 - K*dt,
    # per-hold factor rho^R, steady-state error = rho^R * step / (1 - rho^R)
    K, dt, R = 10.0, 0.01, 10
    rho = 1.0 - K * dt
    step = 2.0 * 0.1 * math.sin(math.pi * freq * 0.1)
    bound = rho**R * step / (1.0 - rho**R)
    steady = float(np.max(rep.position_errors[60:]))
    elapsed = time.perf_counter() - t0
    ok = bound <= 0.002 and steady <= bound * (1.0 + 1e-6) and elapsed < 10.0
    report(
        capsys,
        8,
        "circle steady-state tracking",
        ok,
        f"oracle bound={bound * 1e3:.3f}mm, measured={steady * 1e3:.3f}mm, {elapsed:.1f}s",
    )


def test_criterion_09_latency_monotonicity(capsys):
    model = planar_arm()
    cmds = circle_trajectory(model, Q0, n_setpoints=100)
    e0 = run_pipeline(model, PipelineConfig(), cmds, q0=Q0).summary["mean_position_error"]
    e5 = run_pipeline(model, PipelineConfig(delay_ticks=5), cmds, q0=Q0).summary["mean_position_error"]
    ok = e5 > e0
    report(capsys, 9, "delay 0 vs 5 mean tracking error", ok, f"{e0 * 1e3:.3f}mm -> {e5 * 1e3:.3f}mm")


def test_criterion_10_loss_oracles(capsys):
    rng = np.random.default_rng(1010)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 6))
        params = GmmParams(
            rng.normal(size=k), rng.normal(scale=0.5, size=(k, 6)), rng.uniform(0.3, 2.0, size=(k, 6))
        )
        x = random_diff(rng, scale=0.3)
        worst = max(worst, abs(gmm_nll(params, x) - naive_gmm_nll(params, x.as_vector())))
        z = float(rng.uniform(-10, 10))
        y = int(rng.integers(0, 2))
        worst = max(worst, abs(grasp_ce(z, y) - naive_ce(z, y)))
    history = random_pose_window(rng, 10)
    pred, demo = random_diff(rng), random_diff(rng)
    seq = invariant_loss_sequence(history, [pred], [demo])
    step = invariant_loss_step(history, pred, demo)
    bitwise_ok = seq == step
    std_normal = gmm_nll(GmmParams.single_mode(), DifferentialPose(np.zeros(3), np.zeros(3)))
    mode_err = abs(std_normal - 3.0 * math.log(2.0 * math.pi))
    ok = worst <= 1e-9 and bitwise_ok and mode_err <= 1e-9
    report(
        capsys,
        10,
        "loss oracles",
        ok,
        f"max oracle dev={worst:.3e}, P=0 bitwise={bitwise_ok}, |NLL-3log(2pi)|={mode_err:.3e}",
    )


def test_criterion_11_end_to_end_invariance(capsys, tmp_path):
    rng = np.random.default_rng(1011)
    poses = random_pose_window(rng, 12)
    traj = GripperTrajectory(np.arange(12) * 0.1, poses, [0] * 12)
    q = rng.normal(size=4)
    g = Pose(rng.normal(size=3), q / np.linalg.norm(q))
    moved = GripperTrajectory(traj.times, [compose(g, p) for p in poses], traj.grasps)
    other = GripperTrajectory(traj.times, random_pose_window(rng, 12), traj.grasps)
    pa, pb, pc = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
    traj.save_jsonl(pa)
    moved.save_jsonl(pb)
    other.save_jsonl(pc)
    assert main(["compare", str(pa), str(pb)]) == 0
    d_rigid = json.loads(capsys.readouterr().out)["distance"]
    assert main(["compare", str(pa), str(pc)]) == 0
    d_other = json.loads(capsys.readouterr().out)["distance"]
    ok = d_rigid <= 1e-9 and d_other > 0.01
    report(capsys, 11, "compare: rigid copy vs different trajectory", ok, f"rigid={d_rigid:.3e}, other={d_other:.3e}")
