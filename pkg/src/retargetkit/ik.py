"""Prioritized velocity-level inverse kinematics with task scaling.

Two solvers share one problem statement and are cross-checked in tests:

* solve_esns: saturation-in-the-null-space style active-set iteration.
  Each priority level maximizes its scale factor c in [0, 1] by repeatedly
  pinning the most-violated constraint row at its bound, then polishes the
  weighted-norm objective on the winning scale with an exact active-set QP.
* solve_reference_qp: an independent oracle that solves each level's
  scale maximization as a linear program (HiGHS) and the final weighted
  least-norm step with a convex solver plus an exact KKT polish.

Both enforce the same lexicographic semantics: level equalities are
rank-reduced rows U_r' J a = c U_r' xdot, with U_r an orthonormal basis of
the range of J projected into the (H-weighted) null space of all higher
levels. Lower-priority tasks therefore never disturb higher ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_RANK_TOL = 1e-10
_RANK_TOL_LEVEL = 1e-8
_SING_TOL = 1e-4
_DAMPING = 1e-6
_FEAS_TOL = 1e-9


class IkError(ValueError):
    pass


@dataclass
class TaskSpec:
    priority: int
    jacobian: np.ndarray
    xdot_des: np.ndarray
    scalable: bool = True

    def __post_init__(self):
        self.jacobian = np.atleast_2d(np.asarray(self.jacobian, dtype=float))
        self.xdot_des = np.asarray(self.xdot_des, dtype=float).reshape(-1)
        if self.jacobian.shape[0] != self.xdot_des.shape[0]:
            raise IkError("task jacobian rows must match desired velocity length")


@dataclass
class ConstraintSet:
    lower: np.ndarray
    upper: np.ndarray
    cartesian: list = field(default_factory=list)  # (row, lo, hi) triples

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise IkError("box bounds must have equal length")
        self.cartesian = [
            (np.asarray(r, dtype=float).reshape(-1), float(lo), float(hi)) for r, lo, hi in self.cartesian
        ]

    def rows(self, n: int):
        """All inequality rows as (C, lo, hi) with the box first."""
        C = [np.eye(n)]
        lo = [self.lower]
        hi = [self.upper]
        for r, l, h in self.cartesian:
            C.append(r.reshape(1, n))
            lo.append([l])
            hi.append([h])
        return np.vstack(C), np.concatenate(lo), np.concatenate(hi)


@dataclass
class IkSolution:
    a: np.ndarray
    scales: list
    status: str


def _weighted_pinv(M: np.ndarray, H_inv: np.ndarray) -> np.ndarray:
    """H-weighted right pseudoinverse, damped near singularity."""
    G = M @ H_inv @ M.T
    s = np.linalg.svd(G, compute_uv=False)
    lam = 0.0
    if s.size == 0 or s[-1] < _SING_TOL:
        lam = _DAMPING
    return H_inv @ M.T @ np.linalg.inv(G + lam * np.eye(G.shape[0]))


def build_level_equalities(tasks, H: np.ndarray):
    """Reduced equality rows (A_i, d_i) per level: A_i a = c_i d_i.

    Shared problem statement used by both solvers. Level i's achievable
    task subspace is the range of J_i restricted to the null space of all
    higher levels (H-weighted recursion). Rank decisions and the projector
    update both come from one whitened SVD with hard truncation; a damped
    pseudoinverse here would leak residual rank into lower levels and make
    their equalities inconsistent.
    """
    tasks = sorted(tasks, key=lambda t: t.priority)
    priorities = [t.priority for t in tasks]
    if len(set(priorities)) != len(priorities):
        raise IkError("task priorities must be unique")
    n = tasks[0].jacobian.shape[1]
    for t in tasks:
        if t.jacobian.shape[1] != n:
            raise IkError("task jacobians disagree on DOF count")
    L = np.linalg.cholesky(H)
    L_inv_T = np.linalg.inv(L).T
    P = np.eye(n)
    levels = []
    for t in tasks:
        M = t.jacobian @ P
        B = M @ L_inv_T  # whitened: B B' = M H^-1 M'
        U, s, Vt = np.linalg.svd(B)
        rank = int(np.sum(s > _RANK_TOL_LEVEL * max(1.0, s[0] if s.size else 1.0)))
        if rank == 0:
            levels.append((t, np.zeros((0, n)), np.zeros(0)))
            continue
        Ur = U[:, :rank]
        A = Ur.T @ t.jacobian
        d = Ur.T @ t.xdot_des
        levels.append((t, A, d))
        # H-weighted pseudoinverse of M restricted to its numerical range
        pinv_h = L_inv_T @ Vt[:rank].T @ np.diag(1.0 / s[:rank]) @ Ur.T
        P = P - pinv_h @ M @ P
    return levels


def _min_norm_subject_to(H: np.ndarray, G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """argmin 0.5 a'Ha subject to G a = h (consistent or least-squares)."""
    H_inv = np.linalg.inv(H)
    S = G @ H_inv @ G.T
    s = np.linalg.svd(S, compute_uv=False)
    if s.size and s[-1] > _SING_TOL * max(1.0, s[0]):
        lam = np.linalg.solve(S, h)
    else:
        lam = np.linalg.pinv(S, rcond=1e-12) @ h
    return H_inv @ G.T @ lam


def _active_set_qp(H, A_eq, b_eq, C, lo, hi, a0, working0):
    """Exact primal active-set solve of
    min 0.5 a'Ha  s.t.  A_eq a = b_eq,  lo <= C a <= hi,
    starting from a feasible a0. Working-set entries are (row_index, side)
    with side +1 for the upper bound, -1 for the lower.
    """
    n = H.shape[1]
    a = a0.copy()
    working = list(working0)
    for _ in range(200):
        rows = [A_eq] if A_eq.shape[0] else []
        rhs = [b_eq] if A_eq.shape[0] else []
        for idx, side in working:
            rows.append(C[idx : idx + 1])
            rhs.append([hi[idx] if side > 0 else lo[idx]])
        if rows:
            G = np.vstack(rows)
            h = np.concatenate([np.atleast_1d(r) for r in rhs])
        else:
            G = np.zeros((0, n))
            h = np.zeros(0)
        a_star = _min_norm_subject_to(H, G, h) if G.shape[0] else np.zeros(n)
        step = a_star - a
        if np.linalg.norm(step, np.inf) <= 1e-12:
            # minimizer on current working set: check bound multipliers
            if not working:
                return a, working
            grad = H @ a
            # multipliers: grad = A_eq' mu + sum side * lambda * c_row
            GT = G.T
            sol, *_ = np.linalg.lstsq(GT, grad, rcond=None)
            m_eq = A_eq.shape[0]
            lambdas = sol[m_eq:]
            # KKT: grad = sum sol_i * row_i; an upper pin is optimal with
            # sol_i <= 0, a lower pin with sol_i >= 0, so release the pin
            # with the largest positive side-adjusted multiplier
            signed = np.array([lam * side for lam, (_, side) in zip(lambdas, working)])
            worst = int(np.argmax(signed))
            if signed[worst] <= 1e-10:
                return a, working
            working.pop(worst)
            continue
        # step length to the nearest blocking inequality
        Cs = C @ step
        Ca = C @ a
        alpha = 1.0
        block = None
        for i in range(C.shape[0]):
            if any(idx == i for idx, _ in working):
                continue
            if Cs[i] > 1e-14:
                t = (hi[i] - Ca[i]) / Cs[i]
                if t < alpha - 1e-14:
                    alpha, block = t, (i, 1)
            elif Cs[i] < -1e-14:
                t = (lo[i] - Ca[i]) / Cs[i]
                if t < alpha - 1e-14:
                    alpha, block = t, (i, -1)
        a = a + max(alpha, 0.0) * step
        if block is None:
            a = a_star
        else:
            working.append(block)
    return a, working


def _parametric_solution(H, G_fix, h_fix, A, d, rows_active, rhs_active, n):
    """a(c) = alpha * c + beta solving the pinned equality system."""
    top = [G_fix] if G_fix.shape[0] else []
    if A.shape[0]:
        top.append(A)
    if rows_active.shape[0]:
        top.append(rows_active)
    G = np.vstack(top) if top else np.zeros((0, n))

    def solve(c):
        parts = []
        if G_fix.shape[0]:
            parts.append(h_fix)
        if A.shape[0]:
            parts.append(c * d)
        if rows_active.shape[0]:
            parts.append(rhs_active)
        h = np.concatenate(parts) if parts else np.zeros(0)
        return _min_norm_subject_to(H, G, h) if G.shape[0] else np.zeros(n)

    beta = solve(0.0)
    alpha = solve(1.0) - beta
    return alpha, beta


def _scale_interval(alpha, beta, C, lo, hi, active_idx):
    """Feasible c-interval of lo <= C (alpha c + beta) <= hi over inactive rows."""
    c_lo, c_hi = 0.0, 1.0
    Ca = C @ alpha
    Cb = C @ beta
    for i in range(C.shape[0]):
        if i in active_idx:
            continue
        g, b = Ca[i], Cb[i]
        if abs(g) < 1e-14:
            if b > hi[i] + _FEAS_TOL or b < lo[i] - _FEAS_TOL:
                return None
            continue
        t_hi = (hi[i] - b) / g
        t_lo = (lo[i] - b) / g
        lo_i, hi_i = (t_lo, t_hi) if g > 0 else (t_hi, t_lo)
        c_lo = max(c_lo, lo_i)
        c_hi = min(c_hi, hi_i)
    if c_lo > c_hi + _FEAS_TOL:
        return None
    return max(c_lo, 0.0), min(c_hi, 1.0)


def _line_candidate(H, G_fix, h_fix, A, d, C, lo, hi, working, scalable):
    """Best feasible scale with the rows in `working` pinned at their bounds.

    Two regimes: if the pinned system leaves the task direction reachable at
    any scale, the scale is a free parameter and the best value is the upper
    end of the feasible interval; if the pins over-determine the task rows,
    the equality is consistent at a single scale only, which is computed
    directly. Returns (c, a) or None when infeasible/inconsistent.
    """
    n = H.shape[1]
    idx_set = {i for i, _ in working}
    rows = np.vstack([C[i : i + 1] for i, _ in working]) if working else np.zeros((0, n))
    rhs = np.array([hi[i] if s > 0 else lo[i] for i, s in working])
    hard = np.vstack([G_fix, rows])
    b_hard = np.concatenate([h_fix, rhs])
    if hard.shape[0]:
        U, s, Vt = np.linalg.svd(hard, full_matrices=True)
        r = int(np.sum(s > _RANK_TOL * max(1.0, s[0] if s.size else 1.0)))
        a0 = Vt[:r].T @ ((U[:, :r].T @ b_hard) / s[:r])
        if np.max(np.abs(hard @ a0 - b_hard)) > 1e-8:
            return None  # pins conflict with the fixed equalities
        Z = Vt[r:].T
    else:
        a0 = np.zeros(n)
        Z = np.eye(n)
    c_pinned = None
    if A.shape[0]:
        AZ = A @ Z
        if AZ.shape[1]:
            coef, *_ = np.linalg.lstsq(AZ, d, rcond=None)
            d_perp = d - AZ @ coef
        else:
            d_perp = d.copy()
        if np.linalg.norm(d_perp) > 1e-10 * max(1.0, np.linalg.norm(d)):
            # scale is determined: the component of the task outside the
            # pinned freedom must be matched exactly
            if AZ.shape[1]:
                coef0, *_ = np.linalg.lstsq(AZ, A @ a0, rcond=None)
                r_perp = A @ a0 - AZ @ coef0
            else:
                r_perp = A @ a0
            c_pinned = float(r_perp @ d_perp) / float(d_perp @ d_perp)
            if np.max(np.abs(r_perp - c_pinned * d_perp)) > 1e-8:
                return None  # inconsistent at every scale
            if c_pinned < -_FEAS_TOL or c_pinned > 1.0 + _FEAS_TOL:
                return None
            c_pinned = float(np.clip(c_pinned, 0.0, 1.0))
    alpha, beta = _parametric_solution(H, G_fix, h_fix, A, d, rows, rhs, n)
    if c_pinned is not None:
        c = c_pinned
        interval = _scale_interval(alpha, beta, C, lo, hi, idx_set)
        if interval is None or not (interval[0] - _FEAS_TOL <= c <= interval[1] + _FEAS_TOL):
            return None
    else:
        interval = _scale_interval(alpha, beta, C, lo, hi, idx_set)
        if interval is None:
            return None
        c = interval[1] if scalable else 1.0
        if not scalable and not (interval[0] - _FEAS_TOL <= 1.0 <= interval[1] + _FEAS_TOL):
            return None
    a = alpha * c + beta
    resid = 0.0
    if A.shape[0]:
        resid = max(resid, float(np.max(np.abs(A @ a - c * d))))
    if hard.shape[0]:
        resid = max(resid, float(np.max(np.abs(hard @ a - b_hard))))
    if resid > 1e-8:
        return None
    return c, a


def _advance_scale(H, G_fix, h_fix, A, d, C, lo, hi, c0, a0, working0, scalable):
    """Parametric refinement of the scale phase.

    From a feasible (c0, a0), alternately re-optimize the weighted norm at
    the current scale (which may release pins) and push the scale along the
    resulting pinned line; when stuck, pivot by releasing single pins. Ends
    at a scale no single release can improve.
    """
    n = H.shape[1]
    A_eq_base = np.vstack([G_fix, A]) if (G_fix.shape[0] or A.shape[0]) else np.zeros((0, n))
    c, a = c0, a0
    working = list(working0)
    budget = 400
    while budget > 0 and c < 1.0 - 1e-15:
        # re-center on the weighted-norm optimum at the current scale; its
        # working set seeds the search over degenerate neighbours
        b_eq = np.concatenate([h_fix, c * d])
        a, working = _active_set_qp(H, A_eq_base, b_eq, C, lo, hi, a, working)
        frontier = [(c, a, list(working))]
        expanded = set()
        improved = False
        while frontier and budget > 0 and not improved:
            base_c, base_a, base_w = frontier.pop(0)
            key = frozenset(base_w)
            if key in expanded:
                continue
            expanded.add(key)
            budget -= 1
            # neighbour working sets: single release, single addition, and
            # exchange pivots (release one row, pin another)
            trials = []
            for k in range(len(base_w)):
                trials.append(base_w[:k] + base_w[k + 1 :])
            pinned = {i for i, _ in base_w}
            for i in range(C.shape[0]):
                if i not in pinned:
                    for s in (1, -1):
                        trials.append(base_w + [(i, s)])
            for k in range(len(base_w)):
                reduced = base_w[:k] + base_w[k + 1 :]
                held = {i for i, _ in reduced}
                for i in range(C.shape[0]):
                    if i in held:
                        continue
                    for s in (1, -1):
                        trials.append(reduced + [(i, s)])
            for cand_w in trials:
                if frozenset(cand_w) in expanded:
                    continue
                cand = _line_candidate(H, G_fix, h_fix, A, d, C, lo, hi, cand_w, scalable)
                if cand is None:
                    continue
                if cand[0] > c + 1e-12:
                    c, a, working = cand[0], cand[1], cand_w
                    improved = True
                    break
                if cand[0] > c - 1e-12:
                    # same scale at a different vertex of the degenerate fan;
                    # queue it, progress may resume from there
                    frontier.append((cand[0], cand[1], cand_w))
        if not improved:
            break
    return min(c, 1.0), a, working


def solve_esns(tasks, constraints: ConstraintSet, H=None) -> IkSolution:
    """Task-scaling prioritized IK via null-space saturation.

    Levels are processed in priority order. Within a level the solver
    repeatedly pins the inequality row most violated by the unscaled
    solution, recomputes the parametric solution a(c), and keeps the best
    feasible scale found; the winning scale is then polished with an exact
    active-set pass so saturations can also be released.
    """
    if not tasks:
        raise IkError("at least one task required")
    n = tasks[0].jacobian.shape[1]
    if H is None:
        H = np.eye(n)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    C, lo, hi = constraints.rows(n)
    if np.any(lo > hi + _FEAS_TOL):
        return IkSolution(np.zeros(n), [0.0 for _ in tasks], "infeasible")

    levels = build_level_equalities(tasks, H)
    G_fix = np.zeros((0, n))
    h_fix = np.zeros(0)
    scales = []
    a_best = np.zeros(n)
    working_best: list = []
    feasible_any = False
    for task, A, d in levels:
        best = None  # (c, a, active list)
        active: list = []  # (row index, side)
        max_iters = C.shape[0]
        for _ in range(max_iters + 1):
            idx_set = {i for i, _ in active}
            rows_a = np.vstack([C[i : i + 1] for i, _ in active]) if active else np.zeros((0, n))
            rhs_a = np.array([hi[i] if s > 0 else lo[i] for i, s in active])
            stacked = np.vstack([G_fix, A, rows_a]) if (G_fix.shape[0] or A.shape[0] or active) else np.zeros((0, n))
            rank_now = np.linalg.matrix_rank(stacked, tol=1e-10) if stacked.shape[0] else 0
            alpha, beta = _parametric_solution(H, G_fix, h_fix, A, d, rows_a, rhs_a, n)
            interval = _scale_interval(alpha, beta, C, lo, hi, idx_set)
            if interval is not None:
                c_cand = interval[1] if task.scalable else 1.0
                if (not task.scalable) and not (interval[0] - _FEAS_TOL <= 1.0 <= interval[1] + _FEAS_TOL):
                    c_cand = None
                if c_cand is not None:
                    a_cand = alpha * c_cand + beta
                    # guard against inconsistent pins: candidate must really
                    # satisfy the stacked equalities
                    resid = 0.0
                    if A.shape[0]:
                        resid = max(resid, float(np.max(np.abs(A @ a_cand - c_cand * d))))
                    if G_fix.shape[0]:
                        resid = max(resid, float(np.max(np.abs(G_fix @ a_cand - h_fix))))
                    if rows_a.shape[0]:
                        resid = max(resid, float(np.max(np.abs(rows_a @ a_cand - rhs_a))))
                    if resid > 1e-8:
                        c_cand = None
                if c_cand is not None and (best is None or c_cand > best[0] + 1e-15):
                    best = (c_cand, alpha * c_cand + beta, list(active))
                if c_cand is not None and c_cand >= 1.0 - 1e-15:
                    break
            # saturate the row most violated by the unscaled solution; the
            # row must add rank, else the level has no freedom left
            a_unscaled = alpha + beta
            viol_hi = C @ a_unscaled - hi
            viol_lo = lo - C @ a_unscaled
            viol_hi[list(idx_set)] = -np.inf
            viol_lo[list(idx_set)] = -np.inf
            order = np.argsort(-np.maximum(viol_hi, viol_lo), kind="stable")
            added = False
            for i in order:
                i = int(i)
                v_hi, v_lo = viol_hi[i], viol_lo[i]
                if max(v_hi, v_lo) <= _FEAS_TOL:
                    break
                trial = np.vstack([stacked, C[i : i + 1]])
                if np.linalg.matrix_rank(trial, tol=1e-10) <= rank_now:
                    continue
                active.append((i, 1) if v_hi >= v_lo else (i, -1))
                added = True
                break
            if not added:
                break
        if best is None:
            # level unachievable even at zero scale: drop its equality
            scales.append(0.0)
            continue
        c_star, a_feas, active_star = best
        # parametric refinement: the greedy pass can pin the wrong rows, so
        # pivot pins until no single release increases the scale
        c_star, a_feas, active_star = _advance_scale(
            H, G_fix, h_fix, A, d, C, lo, hi, c_star, a_feas, active_star, task.scalable
        )
        # polish: exact weighted-least-norm at the winning scale
        A_eq = np.vstack([G_fix, A]) if (G_fix.shape[0] or A.shape[0]) else np.zeros((0, n))
        b_eq = np.concatenate([h_fix, c_star * d])
        a_pol, working = _active_set_qp(H, A_eq, b_eq, C, lo, hi, a_feas, active_star)
        G_fix = A_eq
        h_fix = b_eq
        a_best = a_pol
        working_best = working
        scales.append(float(min(c_star, 1.0)))
        feasible_any = True
    if not feasible_any:
        # no level could be enforced; fall back to the safest feasible point
        a_best, working_best = _active_set_qp(
            H, np.zeros((0, n)), np.zeros(0), C, lo, hi, np.clip(np.zeros(n), lo[:n], hi[:n]), []
        )
    # candidate acceptance allows 1e-9 slack, so snap the box coordinates
    # back inside; the perturbation is below every comparison tolerance
    a_best = np.clip(a_best, constraints.lower, constraints.upper)
    status = "optimal"
    if any(c < 1.0 - 1e-9 for c in scales):
        status = "saturated"
    return IkSolution(a_best, scales, status)


def solve_reference_qp(tasks, constraints: ConstraintSet, H=None) -> IkSolution:
    """Independent small-scale oracle for the same lexicographic problem.

    Per level, the maximal scale is found as a linear program over (a, c);
    the final joint velocity minimizes the weighted norm subject to all
    pinned equalities via a convex program, then an exact KKT polish on the
    detected active set certifies the result.
    """
    from scipy.optimize import linprog

    if not tasks:
        raise IkError("at least one task required")
    n = tasks[0].jacobian.shape[1]
    if n > 12:
        raise IkError("reference solver is limited to 12 DOFs")
    if H is None:
        H = np.eye(n)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    C, lo, hi = constraints.rows(n)
    if np.any(lo > hi + _FEAS_TOL):
        return IkSolution(np.zeros(n), [0.0 for _ in tasks], "infeasible")

    levels = build_level_equalities(tasks, H)
    G_fix = np.zeros((0, n))
    h_fix = np.zeros(0)
    scales = []
    kept = []
    for task, A, d in levels:
        m = A.shape[0]
        # variables z = (a, c); maximize c
        A_eq = np.zeros((G_fix.shape[0] + m, n + 1))
        b_eq = np.zeros(G_fix.shape[0] + m)
        A_eq[: G_fix.shape[0], :n] = G_fix
        b_eq[: G_fix.shape[0]] = h_fix
        A_eq[G_fix.shape[0] :, :n] = A
        A_eq[G_fix.shape[0] :, n] = -d
        A_ub = np.zeros((2 * C.shape[0], n + 1))
        A_ub[: C.shape[0], :n] = C
        A_ub[C.shape[0] :, :n] = -C
        b_ub = np.concatenate([hi, -lo])
        cost = np.zeros(n + 1)
        cost[n] = -1.0
        c_upper = 1.0 if task.scalable else 1.0
        c_lower = 0.0 if task.scalable else 1.0
        res = linprog(
            cost,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=[(None, None)] * n + [(c_lower, c_upper)],
            method="highs",
        )
        if not res.success:
            scales.append(0.0)
            continue
        c_star = float(np.clip(res.x[n], 0.0, 1.0))
        G_fix = np.vstack([G_fix, A])
        h_fix = np.concatenate([h_fix, c_star * d])
        scales.append(c_star)
        kept.append(True)
    a = _reference_min_norm(H, G_fix, h_fix, C, lo, hi, n)
    if a is None:
        return IkSolution(np.zeros(n), scales, "infeasible")
    status = "saturated" if any(c < 1.0 - 1e-9 for c in scales) else "optimal"
    return IkSolution(a, scales, status)


def _reference_min_norm(H, G, h, C, lo, hi, n):
    import cvxpy as cp

    a = cp.Variable(n)
    cons = [C @ a <= hi, C @ a >= lo]
    if G.shape[0]:
        cons.append(G @ a == h)
    prob = cp.Problem(cp.Minimize(0.5 * cp.quad_form(a, cp.psd_wrap(H))), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-10)
    if a.value is None:
        return None
    a_val = np.asarray(a.value).reshape(n)
    # KKT polish: pin the detected active bounds and re-solve exactly; the
    # conic solution sits within solver tolerance of the bounds, so the
    # activity threshold is swept and the best certified point is kept
    best = a_val
    best_obj = float(a_val @ H @ a_val)
    Ca = C @ a_val
    for thresh in (1e-8, 1e-7, 1e-6, 1e-5):
        act_rows = []
        act_rhs = []
        for i in range(C.shape[0]):
            if Ca[i] >= hi[i] - thresh:
                act_rows.append(C[i])
                act_rhs.append(hi[i])
            elif Ca[i] <= lo[i] + thresh:
                act_rows.append(C[i])
                act_rhs.append(lo[i])
        rows = [G] if G.shape[0] else []
        rhs = [h] if G.shape[0] else []
        if act_rows:
            rows.append(np.vstack(act_rows))
            rhs.append(np.array(act_rhs))
        if not rows:
            continue
        Gp = np.vstack(rows)
        hp = np.concatenate(rhs)
        a_pol = _min_norm_subject_to(H, Gp, hp)
        ok = (
            np.all(C @ a_pol <= hi + _FEAS_TOL)
            and np.all(C @ a_pol >= lo - _FEAS_TOL)
            and (not G.shape[0] or np.linalg.norm(G @ a_pol - h, np.inf) < 1e-8)
        )
        if ok and float(a_pol @ H @ a_pol) <= best_obj + 1e-9:
            obj = float(a_pol @ H @ a_pol)
            if obj < best_obj + 1e-9:
                best = a_pol
                best_obj = min(best_obj, obj)
    return best


def pose_error(x_des, x_cur) -> np.ndarray:
    """6-vector (translation error, rotation-vector error) in the root frame."""
    from .se3 import _quat_to_rotvec, matrix_to_quat  # root-frame log of R_des R_cur^T

    dt = x_des.translation - x_cur.translation
    rel = x_des.rotation_matrix @ x_cur.rotation_matrix.T
    dr = _quat_to_rotvec(matrix_to_quat(rel))
    return np.concatenate([dt, dr])


def build_tasks(model, q, x_des, q_bias, k_grip, k_bias):
    """Two-level task stack: gripper pose tracking, then posture bias."""
    from .kinematics import forward_kinematics, jacobian

    q = np.asarray(q, dtype=float).reshape(-1)
    q_bias = np.asarray(q_bias, dtype=float).reshape(-1)
    if q_bias.shape != q.shape:
        raise IkError("posture bias dimension mismatch")
    k_grip = np.broadcast_to(np.asarray(k_grip, dtype=float), (6,))
    k_bias = np.broadcast_to(np.asarray(k_bias, dtype=float), q.shape)
    x_cur = forward_kinematics(model, q)
    J = jacobian(model, q)
    xdot1 = k_grip * pose_error(x_des, x_cur)
    xdot2 = k_bias * (q_bias - q)
    return [
        TaskSpec(priority=1, jacobian=J, xdot_des=xdot1, scalable=True),
        TaskSpec(priority=2, jacobian=np.eye(q.shape[0]), xdot_des=xdot2, scalable=True),
    ]
