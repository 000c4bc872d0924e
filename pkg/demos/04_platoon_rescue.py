"""Three-vehicle platoon, study 1: the feasibility barrier keeps every QP
solvable under hard braking limits.

The lead vehicle swings its drive force sinusoidally; two followers chase
desired speeds well above the lead's and must brake hard when they catch
up. Without the feasibility barrier the braking demand eventually exceeds
the force bounds and the QPs go infeasible in episodes (continued here by
re-solving without the box, which is what the dashed over-limit
decelerations amount to). With the barrier enabled the followers give
ground earlier and every QP stays solvable.

Writes platoon_case1_{on,off}.csv next to this script; plots them if
matplotlib is importable.
"""

import os

import numpy as np

from cbf_safe import SimConfig, acc_case_params, build_acc_platoon, run
from cbf_safe.cli import emit_trace

HERE = os.path.dirname(os.path.abspath(__file__))
MASSES = {"2": acc_case_params(1)[1].mass, "3": acc_case_params(1)[2].mass}


def digest(trace, label):
    print(f"{label}:")
    for agent in trace.scenario.agents:
        recs = [rec[agent.name] for rec in trace.samples
                if agent.name in rec]
        bad = [trace.t[k] for k, rec in enumerate(trace.samples)
               if agent.name in rec and rec[agent.name].status == "infeasible"]
        us = [r.u[0] for r in recs if np.isfinite(r.u[0])]
        lo, hi = agent.bounds.lower[0], agent.bounds.upper[0]
        print(f"  vehicle {agent.name}: "
              f"{len(bad):3d} infeasible samples"
              + (f" (first at t = {bad[0]:.1f} s)" if bad else "")
              + f", min b = {min(r.psi[0] for r in recs):7.3f} m"
              f", u in [{min(us):8.1f}, {max(us):8.1f}] N"
              f" vs bounds [{lo:.1f}, {hi:.1f}]")


config_on = SimConfig(t_end=30.0, dt=0.1, feasibility_enabled=True)
config_off = SimConfig(t_end=30.0, dt=0.1, feasibility_enabled=False,
                       infeasibility_policy="drop-control-bounds")

on = run(build_acc_platoon(case=1), config_on)
off = run(build_acc_platoon(case=1), config_off)
digest(on, "feasibility barrier ON  (every QP solvable, bounds respected)")
digest(off, "feasibility barrier OFF (episodes exceed the braking bound)")

for tag, trace in (("on", on), ("off", off)):
    path = os.path.join(HERE, f"platoon_case1_{tag}.csv")
    emit_trace(trace, path)
    print(f"wrote {path}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    for trace, style, label in ((on, "-", "with barrier"),
                                (off, "--", "without")):
        t = trace.t
        for agent, color in zip(trace.scenario.agents, ("tab:blue", "tab:red")):
            u = np.array([rec[agent.name].u[0] for rec in trace.samples])
            b = np.array([rec[agent.name].psi[0] for rec in trace.samples])
            axes[0].plot(t, u / MASSES[agent.name], style, color=color,
                         label=f"vehicle {agent.name} ({label})")
            axes[2].plot(t, b, style, color=color)
        for j, color in zip((1, 3, 5), ("k", "tab:blue", "tab:red")):
            axes[1].plot(t, trace.states[:, j], style, color=color)
    axes[0].set_ylabel("acceleration (m/s^2)")
    axes[1].set_ylabel("velocity (m/s)")
    axes[2].set_ylabel("gap barrier b (m)")
    for ax in axes:
        ax.set_xlabel("t (s)")
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    out = os.path.join(HERE, "platoon_case1.png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")
