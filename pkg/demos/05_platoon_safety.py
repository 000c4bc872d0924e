"""Three-vehicle platoon, study 2: under even tighter braking limits the
feasibility barrier is what preserves safety.

Braking bounds drop to 0.2 g / 0.25 g. The baseline without the barrier
saturates at maximum deceleration once its QPs go infeasible
(clamp-to-bounds continuation); that is too little too late and the gap
barrier b crosses zero: a rear-end collision at the safety distance. With
the barrier the followers brake far earlier and b never approaches zero,
while controls respect the bounds in both variants.
"""

import numpy as np

from cbf_safe import SimConfig, build_acc_platoon, run

config_on = SimConfig(t_end=30.0, dt=0.1, feasibility_enabled=True)
config_off = SimConfig(t_end=30.0, dt=0.1, feasibility_enabled=False,
                       infeasibility_policy="clamp-to-bounds")

on = run(build_acc_platoon(case=2), config_on)
off = run(build_acc_platoon(case=2), config_off)

for label, trace in (("with feasibility barrier", on),
                     ("without (clamped braking)", off)):
    print(f"{label}:")
    for agent in trace.scenario.agents:
        t_neg = None
        min_b = np.inf
        clamped = 0
        for k, rec in enumerate(trace.samples):
            s = rec.get(agent.name)
            if s is None:
                continue
            min_b = min(min_b, s.psi[0])
            if s.psi[0] < 0.0 and t_neg is None:
                t_neg = trace.t[k]
            if "clamp-to-bounds" in s.flag:
                clamped += 1
        us = [rec[agent.name].u[0] for rec in trace.samples
              if agent.name in rec and np.isfinite(rec[agent.name].u[0])]
        within = (min(us) >= agent.bounds.lower[0] - 1e-9
                  and max(us) <= agent.bounds.upper[0] + 1e-9)
        verdict = ("safe" if t_neg is None
                   else f"GAP VIOLATED from t = {t_neg:.1f} s")
        print(f"  vehicle {agent.name}: min b = {min_b:8.3f} m -> {verdict}; "
              f"{clamped} clamped samples; controls within bounds: {within}")
