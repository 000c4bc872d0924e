"""The dense QP solver and its certificates.

Every per-interval problem is a tiny strictly convex QP over (u, delta).
The active-set solver reports the optimality evidence (active constraints,
multipliers, KKT residual) and, for empty feasible sets, a certificate
naming constraints whose one-dimensional reduction is empty.
"""

import numpy as np

from cbf_safe import ConstraintRow, QpProblem, solve, verify_kkt

# minimize u^2 + 1000 delta^2 subject to a soft tracking row and bounds
row = ConstraintRow(coeffs=[-4.85e-3, -1.0], bound=-16.97, sense="<=",
                    label="clf")
problem = QpProblem(
    hessian=[[2.0, 0.0], [0.0, 2000.0]],
    linear=[0.0, 0.0],
    rows=(row,),
    box_lower=[-6474.6, -np.inf],
    box_upper=[6474.6, np.inf],
)
sol = solve(problem)
print("tracking QP:")
print(f"  status      = {sol.status}")
print(f"  (u, delta)  = ({sol.point[0]:.4f}, {sol.point[1]:.4f})")
print(f"  objective   = {sol.objective:.4f}")
print(f"  active rows = {sol.active_set} (stacked indexing: rows, then box)")
print(f"  kkt residual= {sol.kkt_residual:.2e}")
print(f"  residual rechecked = {verify_kkt(problem, sol.point, sol.multipliers):.2e}")

# an infeasible problem: the safety row demands u <= -2 while the box floor
# is -1; the certificate names the clashing constraints
hard = QpProblem(
    hessian=[[2.0]],
    linear=[0.0],
    rows=(ConstraintRow(coeffs=[1.0], bound=-2.0, sense="<=", label="hocbf"),),
    box_lower=[-1.0],
    box_upper=[1.0],
)
sol = solve(hard)
print("\nconflicting QP:")
print(f"  status      = {sol.status}")
print(f"  certificate = {sol.certificate}  "
      "(row 0 and the lower box bound exclude each other)")
