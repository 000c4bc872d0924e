"""Walk through the barrier chain and constraint rows at a single state.

A follower keeps a gap z to a constant-speed lead; safety is z >= 10 m. The
barrier has relative degree two in the follower's acceleration, so the QP
row comes from a two-level derivative chain. This script evaluates every
piece at one state and shows the feasibility margin: the row's value at the
admissible control most favorable to it. A positive margin means braking
hard enough is still allowed by the force bounds.
"""

from dataclasses import replace

import numpy as np

from cbf_safe import (
    build_sacc,
    feasibility_margin,
    hocbf_constraint_row,
    psi_sequence,
    sup_control,
)
from cbf_safe.scenarios import SaccParams

params = SaccParams()
scenario = build_sacc(params)
ego = scenario.agents[0]

state = np.array([50.0, 10.0])  # 50 m gap, ego at 10 m/s vs lead 13.89 m/s
print(f"state: gap = {state[0]} m, speed = {state[1]} m/s "
      f"(lead {params.v_lead} m/s)")

psi = psi_sequence(ego.hocbf, ego.model, 0.0, state)
print(f"chain values: psi_0 = {psi[0]:.3f} (the barrier itself), "
      f"psi_1 = {psi[1]:.3f}")

row = hocbf_constraint_row(ego.hocbf, ego.model, 0.0, state)
print(f"safety row: {row.coeffs[0]:+.3f} * u >= {row.bound:+.3f} "
      f"  (i.e. u <= {row.bound / row.coeffs[0]:.3f} m/s^2)")

u_fav = sup_control(row.coeffs[:1], ego.bounds)
margin = feasibility_margin(ego.hocbf, ego.model, ego.bounds, 0.0, state)
print(f"bounds: [{ego.bounds.lower[0]}, {ego.bounds.upper[0]}]; most "
      f"favorable admissible control = {u_fav[0]}")
print(f"feasibility margin = {margin:.3f}  (> 0: the safety row and the "
      "control box intersect)")

# the margin is exactly the row's slack at that favorable control
slack = float(row.coeffs[:1] @ u_fav) - row.bound
print(f"row slack at the favorable control = {slack:.3f} (same number)")

# tighten the bounds until the margin flips sign
print("\nshrinking the braking bound:")
for u_min in (-1.178, -0.8, -0.4, -0.2):
    tight = build_sacc(replace(params, u_min=u_min)).agents[0]
    m = feasibility_margin(tight.hocbf, tight.model, tight.bounds, 0.0,
                           np.array([50.0, 17.0]))
    verdict = "solvable" if m > 0 else "CONFLICT: row excludes every bound"
    print(f"  u_min = {u_min:6.3f}: margin = {m:+.3f}  -> {verdict}")
