"""Task scaling under velocity limits: eSNS against the reference solver.

A 1-DOF joint asked to move at twice its speed limit should run exactly at
the limit with scale 0.5. Then a batch of random multi-task instances is
solved by both routes to show they agree.
"""

import numpy as np

from retargetkit import ConstraintSet, TaskSpec, solve_esns, solve_reference_qp

# the double-speed instance: xdot = 2, velocity box [-1, 1]
sol = solve_esns([TaskSpec(1, np.array([[1.0]]), np.array([2.0]))],
                 ConstraintSet(np.array([-1.0]), np.array([1.0])))
print(f"double-speed instance: a = {sol.a[0]:.6f}, scale = {sol.scales[0]:.6f}, status = {sol.status}")

# random two-level instances (tracking task + posture bias), both solvers
rng = np.random.default_rng(11)
worst_da = worst_dc = 0.0
for _ in range(100):
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, n + 1))
    J = rng.normal(size=(m, n))
    xd = rng.normal(size=m) * 2.0
    lo = -rng.uniform(0.2, 1.5, size=n)
    hi = rng.uniform(0.2, 1.5, size=n)
    H = np.diag(rng.uniform(0.5, 3.0, size=n))
    tasks = [TaskSpec(1, J, xd), TaskSpec(2, np.eye(n), rng.normal(size=n))]
    cons = ConstraintSet(lo, hi)
    s1 = solve_esns(tasks, cons, H)
    s2 = solve_reference_qp(tasks, cons, H)
    worst_da = max(worst_da, float(np.max(np.abs(s1.a - s2.a))))
    worst_dc = max(worst_dc, abs(s1.scales[0] - s2.scales[0]))

print(f"100 random instances: max |a_esns - a_ref| = {worst_da:.3e}, max |c1_esns - c1_ref| = {worst_dc:.3e}")
