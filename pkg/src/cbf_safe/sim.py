"""Discretized solve-apply-integrate control loop.

At each interval boundary the engine assembles one QP per controlled agent
from the current state (safety row, optional tracking row, feasibility row
when enabled, box bounds), solves it, holds the optimal control over the
interval and integrates the plant together with the auxiliary log-scale
variables. Everything an analysis needs is recorded per sample: chain
values, assembled rows, margins, solver status and continuation flags.

A single run is strictly sequential; distinct runs are independent (all
shared inputs are immutable) and may execute in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import qp, rk45
from .core import (
    ClfSpec,
    ConfigurationError,
    ControlBounds,
    FeasibilitySpec,
    HocbfSpec,
    SystemModel,
    aux_dot,
    check_sign_consistency,
    clf_constraint_row,
    feasibility_margin,
    feasibility_row,
    hocbf_constraint_row,
    psi_sequence,
    sup_control,
)

POLICIES = ("abort", "drop-control-bounds", "clamp-to-bounds")

STATUS_NONE = "none"      # terminal or unsolved sample


@dataclass(frozen=True)
class Agent:
    """One controlled agent: its world model, constraint specs and QP cost.

    view projects (t, global state, applied controls) onto the agent's model
    state; exogenous signals (a lead vehicle's acceleration) enter there.
    cost maps (t, model state) to (H, c) over the decision vector
    (u_1..u_q, delta). control_index locates the agent's q contiguous
    control slots in the global control vector.
    """

    name: str
    control_index: int
    model: SystemModel
    view: Callable
    hocbf: HocbfSpec
    bounds: ControlBounds
    feasibility: FeasibilitySpec
    cost: Callable
    clf: Optional[ClfSpec] = None


@dataclass(frozen=True)
class Channel:
    """Vehicle-level grouping for trace emission and summaries."""

    label: str
    state_indices: tuple
    velocity_index: int
    agent: Optional[str] = None
    control_index: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    """A runnable system: true plant, open-loop policies, controlled agents.

    ode(t, x, u) is the actual plant derivative given the full control
    vector; policies supply the non-QP control entries as functions of
    (t, x). channels orders vehicles for trace emission.
    """

    name: str
    state_names: tuple
    x0: np.ndarray
    n_controls: int
    ode: Callable
    agents: tuple
    policies: tuple = ()
    channels: tuple = ()


@dataclass(frozen=True)
class SimConfig:
    """Run length, control interval, integrator tolerances and policies.

    infeasibility_policy picks the continuation when a QP has no solution:
    abort (stop with a partial trace), drop-control-bounds (re-solve without
    the box and flag the sample) or clamp-to-bounds (apply the
    bound-saturated control most favorable to the safety row and flag the
    sample). feasibility_enabled toggles the auxiliary barrier row.
    """

    t_end: float
    dt: float = 0.1
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    feasibility_enabled: bool = True
    infeasibility_policy: str = "abort"

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigurationError("control interval must be positive")
        if self.t_end < 0.0:
            raise ConfigurationError("t_end must be nonnegative")
        steps = self.t_end / self.dt
        if abs(self.t_end - round(steps) * self.dt) > 1e-12 * max(1.0, self.t_end):
            raise ConfigurationError("t_end must be a multiple of dt")
        if self.infeasibility_policy not in POLICIES:
            raise ConfigurationError(
                f"unknown infeasibility policy {self.infeasibility_policy!r}"
            )

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class AgentSample:
    """Everything recorded for one agent at one sample time."""

    z: np.ndarray            # model state the rows were assembled at
    psi: np.ndarray          # chain values psi_0..psi_{m-1}
    rows: tuple              # assembled ConstraintRow objects
    margin: float            # feasibility margin
    u_sup: np.ndarray        # box point most favorable to the safety row
    a: float                 # auxiliary variable (nan when disabled)
    a_rate: float            # its closed-form rate (nan when disabled)
    u: np.ndarray            # applied control (nan on terminal samples)
    delta: float             # tracking slack (nan when not solved)
    status: str              # optimal | infeasible | max-iterations | none
    flag: str                # continuation/monitor tokens, "|"-joined
    sign_ok: bool            # control-coefficient sign consistency


@dataclass
class SimTrace:
    """Time-indexed record of a run: one record per interval plus the
    terminal state (fewer when aborted)."""

    scenario: Scenario
    config: SimConfig
    t: np.ndarray
    states: np.ndarray
    controls: np.ndarray     # applied controls; nan on the terminal row
    samples: list            # per sample: dict agent name -> AgentSample
    aborted: bool = False
    abort_reason: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return self.t.size


def _assemble(agent: Agent, t: float, z: np.ndarray, a: float,
              enabled: bool):
    """Rows and diagnostics for one agent at one state."""
    psi = psi_sequence(agent.hocbf, agent.model, t, z)
    hrow = hocbf_constraint_row(agent.hocbf, agent.model, t, z)
    rows = [hrow]
    if agent.clf is not None:
        rows.append(clf_constraint_row(agent.clf, agent.model, t, z))
    q = agent.model.q
    u_sup = sup_control(hrow.coeffs[:q], agent.bounds)
    margin = feasibility_margin(agent.hocbf, agent.model, agent.bounds, t, z)
    if enabled:
        a_rate = aux_dot(agent.model, t, z, margin, u_sup)
        rows.append(feasibility_row(agent.feasibility, agent.model, t, z,
                                    a, a_rate, margin))
    else:
        a_rate = math.nan
    return psi, tuple(rows), margin, u_sup, a_rate


def _validate_start(agent: Agent, t: float, z: np.ndarray,
                    enabled: bool) -> None:
    psi = psi_sequence(agent.hocbf, agent.model, t, z)
    for i, value in enumerate(psi):
        if value < 0.0:
            raise ConfigurationError(
                f"initial state violates psi_{i} >= 0 for agent "
                f"{agent.name} (psi_{i} = {value:.6g})"
            )
    if enabled:
        margin = feasibility_margin(agent.hocbf, agent.model, agent.bounds,
                                    t, z)
        if margin <= 0.0:
            raise ConfigurationError(
                f"initial state violates margin > 0 for agent {agent.name} "
                f"(margin = {margin:.6g})"
            )
        spec = agent.feasibility
        floor = spec.gain * math.exp(spec.a0) * margin
        if floor < spec.epsilon:
            raise ConfigurationError(
                f"initial state violates gain*exp(a0)*margin >= epsilon for "
                f"agent {agent.name} ({floor:.6g} < {spec.epsilon:.6g})"
            )


def _agent_problem(agent: Agent, t: float, z: np.ndarray, rows) -> qp.QpProblem:
    H, c = agent.cost(t, z)
    lo = np.concatenate([agent.bounds.lower, [-np.inf]])
    hi = np.concatenate([agent.bounds.upper, [np.inf]])
    return qp.QpProblem(hessian=H, linear=c, rows=rows,
                        box_lower=lo, box_upper=hi)


def integrate_step(scenario: Scenario, config: SimConfig, t0: float,
                   x: np.ndarray, u_held: np.ndarray, aux: np.ndarray):
    """Advance plant and auxiliary variables over one control interval.

    QP-agent controls are held fixed; policy controls are re-evaluated at
    every stage, as are the auxiliary rates (margin and favorable control
    recomputed along the trajectory). Returns the endpoint (state, aux).
    """
    n = x.size
    enabled = config.feasibility_enabled
    agents = scenario.agents

    def rhs(t, y):
        xs = y[:n]
        u = u_held.copy()
        for ci, policy in scenario.policies:
            u[ci] = policy(t, xs)
        xdot = np.asarray(scenario.ode(t, xs, u), dtype=float)
        if not enabled:
            return xdot
        rates = np.empty(len(agents))
        for i, agent in enumerate(agents):
            z = agent.view(t, xs, u)
            coeffs = np.atleast_1d(np.asarray(
                agent.model.lie.control_coeff(t, z), dtype=float))
            u_sup = sup_control(coeffs, agent.bounds)
            margin = feasibility_margin(agent.hocbf, agent.model,
                                        agent.bounds, t, z)
            rates[i] = aux_dot(agent.model, t, z, margin, u_sup)
        return np.concatenate([xdot, rates])

    y0 = np.concatenate([x, aux]) if enabled else x
    y1 = rk45.integrate(rhs, t0, y0, t0 + config.dt,
                        rtol=config.rel_tol, atol=config.abs_tol)
    if enabled:
        return y1[:n], y1[n:]
    return y1, aux


def run(scenario: Scenario, config: SimConfig) -> SimTrace:
    """Execute the solve-apply-integrate loop and record the trace.

    Startup requires every agent's chain values to be nonnegative at x0;
    with the feasibility row enabled the margin must additionally be
    positive with gain*exp(a0)*margin >= epsilon. Violations raise a
    configuration error naming the inequality.
    """
    enabled = config.feasibility_enabled
    x = np.asarray(scenario.x0, dtype=float).copy()
    n = x.size
    agents = scenario.agents
    aux = np.array([agent.feasibility.a0 for agent in agents]) if enabled \
        else np.full(len(agents), math.nan)
    u_held = np.zeros(scenario.n_controls)
    ref_signs: dict = {}

    times, states, controls, samples = [], [], [], []
    aborted = False
    abort_reason = None

    for k in range(config.steps + 1):
        t_k = k * config.dt
        terminal = (k == config.steps)
        for ci, policy in scenario.policies:
            u_held[ci] = policy(t_k, x)
        u_row = np.full(scenario.n_controls, math.nan)
        if not terminal:
            for ci, _ in scenario.policies:
                u_row[ci] = u_held[ci]
        record: dict = {}
        for ai, agent in enumerate(agents):
            q = agent.model.q
            z = agent.view(t_k, x, u_held)
            if k == 0:
                agent.model.check_shapes(t_k, z)
                _validate_start(agent, t_k, z, enabled)
                ref_signs[agent.name] = np.sign(np.atleast_1d(np.asarray(
                    agent.model.lie.control_coeff(t_k, z), dtype=float)))
            psi, rows, margin, u_sup, a_rate = _assemble(
                agent, t_k, z, aux[ai], enabled)
            sign_ok = check_sign_consistency(agent.model, t_k, z,
                                             ref_signs[agent.name])
            flags = [] if sign_ok else ["sign-change"]
            u_applied = np.full(q, math.nan)
            delta = math.nan
            status = STATUS_NONE
            if not terminal:
                problem = _agent_problem(agent, t_k, z, rows)
                sol = qp.solve(problem)
                status = sol.status
                if sol.status == qp.OPTIMAL:
                    u_applied = sol.point[:q]
                    delta = float(sol.point[q])
                elif config.infeasibility_policy == "abort":
                    flags.append("abort")
                    aborted = True
                    abort_reason = (
                        f"QP {sol.status} for agent {agent.name} at "
                        f"t={t_k:.6g}"
                    )
                elif config.infeasibility_policy == "drop-control-bounds":
                    relaxed = qp.solve(qp.without_box(problem))
                    if relaxed.status != qp.OPTIMAL:
                        aborted = True
                        abort_reason = (
                            f"QP {relaxed.status} without bounds for agent "
                            f"{agent.name} at t={t_k:.6g}"
                        )
                    else:
                        u_applied = relaxed.point[:q]
                        delta = float(relaxed.point[q])
                        flags.append("drop-control-bounds")
                else:  # clamp-to-bounds
                    u_applied = u_sup.copy()
                    flags.append("clamp-to-bounds")
                if not aborted and np.isfinite(u_applied).all():
                    u_held[agent.control_index:agent.control_index + q] = u_applied
                    u_row[agent.control_index:agent.control_index + q] = u_applied
            record[agent.name] = AgentSample(
                z=z, psi=psi, rows=rows, margin=margin, u_sup=u_sup,
                a=float(aux[ai]), a_rate=a_rate, u=u_applied, delta=delta,
                status=status, flag="|".join(flags), sign_ok=sign_ok,
            )
            if aborted:
                break
        times.append(t_k)
        states.append(x.copy())
        controls.append(u_row)
        samples.append(record)
        if aborted or terminal:
            break
        x, aux = integrate_step(scenario, config, t_k, x, u_held, aux)
    return SimTrace(
        scenario=scenario, config=config,
        t=np.array(times), states=np.array(states),
        controls=np.array(controls), samples=samples,
        aborted=aborted, abort_reason=abort_reason,
    )
