"""Concrete vehicle systems: constant-speed-lead cruise control and a
three-vehicle heterogeneous platoon, with hand-derived Lie derivatives.

Longitudinal dynamics per vehicle (mass M, speed v > 0, drive/brake force u):

    x' = v
    v' = (u - F_r(v)) / M,    F_r(v) = f0*sgn(v) + f1*v + f2*v^2

F_r collects Coulomb friction, viscous friction and aerodynamic drag; since
v stays positive, sgn(v) = 1 and dF_r/dv = f1 + 2*f2*v.

Follower j keeps the gap to its lead: b = x_lead - x_j - l_p >= 0, relative
degree 2 in u_j. Writing a_L for the lead's acceleration and J_L for its
jerk, the chain pieces the rows need are

    L_f b   = v_lead - v_j
    L_f^2 b = a_L + F_r(v_j)/M_j          (drift part; u_j enters as -u_j/M_j)
    margin  = L_f^2 b + c_d*g + (k1+k2) L_f b + k1*k2*b
    d(margin)/dt = J_L - F_r'(v_j) F_r(v_j)/M_j^2
                   + (k1+k2)(a_L + F_r(v_j)/M_j) + k1*k2*(v_lead - v_j)
                   + [F_r'(v_j)/M_j^2 - (k1+k2)/M_j] * u_j

where c_d*g is the braking-bound term contributed by the most favorable
control (the u_j coefficient -1/M_j is negative, so the supremum sits at the
lower bound -c_d*M_j*g).

The second vehicle follows the lead vehicle's published open-loop maneuver,
so a_L(t) = 2 sin(2 pi t) and J_L(t) = 4 pi cos(2 pi t) are known functions
of time. The third vehicle measures its lead's acceleration; controls are
piecewise constant per interval, so the measurement is modeled as a frozen
state with zero jerk and re-read continuously from the applied control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    ClfSpec,
    ConfigurationError,
    ControlBounds,
    DomainError,
    FeasibilitySpec,
    HocbfSpec,
    LieBundle,
    SystemModel,
)
from .sim import Agent, Channel, Scenario

GRAVITY = 9.81  # m/s^2

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants, chain gains and QP weights for one vehicle.

    Masses in kg, speeds in m/s, forces in N. c_decel/c_accel scale the
    braking/driving force bounds as fractions of M*g. feas_gain is the
    linear gain of the feasibility barrier row, clf_decay the tracking
    convergence rate, relax_weight the cost weight on the tracking slack.
    """

    mass: float
    f0: float = 0.1
    f1: float = 5.0
    f2: float = 0.25
    c_decel: float = 0.4
    c_accel: float = 0.4
    v_desired: float = 24.0
    k1: float = 1.0
    k2: float = 1.0
    feas_gain: float = 0.1
    clf_decay: float = 1.0
    relax_weight: float = 1000.0
    epsilon: float = 1e-10
    a0: float = 1.0

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ConfigurationError("mass must be positive")
        if min(self.f0, self.f1, self.f2) <= 0.0:
            raise ConfigurationError("friction coefficients must be positive")
        if self.c_decel <= 0.0 or self.c_accel <= 0.0:
            raise ConfigurationError("bound coefficients must be positive")
        if self.v_desired <= 0.0:
            raise ConfigurationError("desired speed must be positive")


@dataclass(frozen=True)
class PlatoonState:
    """Positions and speeds of the platoon, lead first, plus optional
    initial auxiliary values for the controlled vehicles."""

    positions: np.ndarray
    velocities: np.ndarray
    aux: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        vel = np.atleast_1d(np.asarray(self.velocities, dtype=float))
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        if pos.shape != vel.shape:
            raise ConfigurationError("positions/velocities shapes differ")
        if np.any(vel <= 0.0):
            raise ConfigurationError("speeds must be positive")
        if np.any(np.diff(pos) >= 0.0):
            raise ConfigurationError(
                "positions must be strictly decreasing from the lead"
            )
        if self.aux is not None:
            aux = np.atleast_1d(np.asarray(self.aux, dtype=float))
            object.__setattr__(self, "aux", aux)
            if aux.size != pos.size - 1:
                raise ConfigurationError(
                    "one auxiliary value per controlled vehicle expected"
                )

    def vector(self) -> np.ndarray:
        """Interleaved (x_1, v_1, x_2, v_2, ...) global state."""
        return np.column_stack([self.positions, self.velocities]).ravel()


def resistance_force(params: VehicleParams, v: float) -> float:
    """Rolling/viscous/aerodynamic resistance at speed v > 0, in Newtons."""
    if v <= 0.0:
        raise DomainError(f"resistance force needs v > 0, got {v}")
    return params.f0 + params.f1 * v + params.f2 * v * v


def resistance_slope(params: VehicleParams, v: float) -> float:
    """dF_r/dv at speed v > 0 (the sgn term is flat there)."""
    if v <= 0.0:
        raise DomainError(f"resistance slope needs v > 0, got {v}")
    return params.f1 + 2.0 * params.f2 * v


def lead_accel(t: float) -> float:
    """Published acceleration of the open-loop lead vehicle."""
    return 2.0 * math.sin(_TWO_PI * t)


def lead_jerk(t: float) -> float:
    return 2.0 * _TWO_PI * math.cos(_TWO_PI * t)


def lead_control(params: VehicleParams, t: float, v: float) -> float:
    """Open-loop lead force: a swinging drive term plus exact resistance
    compensation, so the implied acceleration is 2 sin(2 pi t)."""
    return 2.0 * params.mass * math.sin(_TWO_PI * t) + resistance_force(params, v)


def _follower_agent(name: str, control_index: int, params: VehicleParams,
                    l_p: float, gravity: float, view, accel_fn, jerk_fn,
                    n_model: int, time_varying: bool) -> Agent:
    """Agent for one follower; accel_fn/jerk_fn give the lead's motion as
    functions of (t, model state)."""
    M = params.mass
    k1, k2 = params.k1, params.k2
    v_d = params.v_desired

    def drift(t, z):
        out = np.zeros(n_model)
        out[0] = z[1]
        out[1] = accel_fn(t, z)
        out[2] = z[3]
        out[3] = -resistance_force(params, z[3]) / M
        return out

    def actuation(t, z):
        g = np.zeros((n_model, 1))
        g[3, 0] = 1.0 / M
        return g

    bundle = LieBundle(
        along_drift=(
            lambda t, z: z[1] - z[3],
            lambda t, z: accel_fn(t, z) + resistance_force(params, z[3]) / M,
        ),
        control_coeff=lambda t, z: np.array([-1.0 / M]),
        margin_drift=lambda t, z: (
            jerk_fn(t, z)
            - resistance_slope(params, z[3]) * resistance_force(params, z[3]) / M**2
            + (k1 + k2) * (accel_fn(t, z) + resistance_force(params, z[3]) / M)
            + k1 * k2 * (z[1] - z[3])
        ),
        margin_control=lambda t, z: np.array(
            [resistance_slope(params, z[3]) / M**2 - (k1 + k2) / M]
        ),
        clf_drift=lambda t, z: (
            -2.0 * (z[3] - v_d) * resistance_force(params, z[3]) / M
        ),
        clf_control=lambda t, z: np.array([2.0 * (z[3] - v_d) / M]),
    )
    model = SystemModel(n=n_model, q=1, drift=drift, actuation=actuation,
                        lie=bundle, time_varying=time_varying)

    def cost(t, z):
        fr = resistance_force(params, z[3])
        H = np.array([[2.0 / M**2, 0.0], [0.0, 2.0 * params.relax_weight]])
        c = np.array([-2.0 * fr / M**2, 0.0])
        return H, c

    return Agent(
        name=name,
        control_index=control_index,
        model=model,
        view=view,
        hocbf=HocbfSpec(barrier=lambda t, z: z[0] - z[2] - l_p,
                        gains=(k1, k2)),
        bounds=ControlBounds(lower=[-params.c_decel * M * gravity],
                             upper=[params.c_accel * M * gravity]),
        feasibility=FeasibilitySpec(gain=params.feas_gain,
                                    epsilon=params.epsilon, a0=params.a0),
        cost=cost,
        clf=ClfSpec(lyapunov=lambda t, z: (z[3] - v_d) ** 2,
                    decay=params.clf_decay,
                    relax_weight=params.relax_weight),
    )


def acc_case_params(case: int):
    """Per-vehicle parameter sets for the two platoon studies.

    Both use unit chain gains; they differ in the feasibility-barrier gain
    and the braking-bound coefficients (the second study brakes much
    tighter). Driving-bound coefficients stay at (0.4, 0.35).
    """
    if case == 1:
        feas_gain, c_d = 0.1, (0.4, 0.35)
    elif case == 2:
        feas_gain, c_d = 0.05, (0.2, 0.25)
    else:
        raise ConfigurationError(f"unknown case {case!r} (expected 1 or 2)")
    lead = VehicleParams(mass=1500.0)
    second = VehicleParams(mass=1650.0, v_desired=24.0, c_accel=0.4,
                           c_decel=c_d[0], feas_gain=feas_gain)
    third = VehicleParams(mass=1550.0, v_desired=25.0, c_accel=0.35,
                          c_decel=c_d[1], feas_gain=feas_gain)
    return lead, second, third


DEFAULT_PLATOON_START = PlatoonState(positions=(0.0, -100.0, -190.0),
                                     velocities=(13.89, 8.0, 14.0))


def build_acc_platoon(case: int = 1, params=None,
                      initial: PlatoonState = DEFAULT_PLATOON_START,
                      l_p: float = 10.0,
                      gravity: float = GRAVITY) -> Scenario:
    """Three-vehicle platoon: open-loop lead, two QP-controlled followers.

    Global state (x_1, v_1, x_2, v_2, x_3, v_3); controls (u_1, u_2, u_3)
    with u_1 from the published lead maneuver. Follower rows use the lead's
    current kinematics as known exogenous signals; the third vehicle reads
    its lead's acceleration off the currently applied second-vehicle
    control.
    """
    if params is None:
        params = acc_case_params(case)
    p1, p2, p3 = params
    if initial.positions.size != 3:
        raise ConfigurationError("platoon scenarios take three vehicles")
    if initial.aux is not None:
        p2 = replace(p2, a0=float(initial.aux[0]))
        p3 = replace(p3, a0=float(initial.aux[1]))

    def ode(t, x, u):
        return np.array([
            x[1],
            (u[0] - resistance_force(p1, x[1])) / p1.mass,
            x[3],
            (u[1] - resistance_force(p2, x[3])) / p2.mass,
            x[5],
            (u[2] - resistance_force(p3, x[5])) / p3.mass,
        ])

    def view_second(t, x, u):
        return x[:4].copy()

    def view_third(t, x, u):
        measured = (u[1] - resistance_force(p2, x[3])) / p2.mass
        return np.array([x[2], x[3], x[4], x[5], measured])

    second = _follower_agent(
        "2", 1, p2, l_p, gravity, view_second,
        accel_fn=lambda t, z: lead_accel(t),
        jerk_fn=lambda t, z: lead_jerk(t),
        n_model=4, time_varying=True,
    )
    third = _follower_agent(
        "3", 2, p3, l_p, gravity, view_third,
        accel_fn=lambda t, z: z[4],
        jerk_fn=lambda t, z: 0.0,
        n_model=5, time_varying=False,
    )
    return Scenario(
        name="acc",
        state_names=("x1", "v1", "x2", "v2", "x3", "v3"),
        x0=initial.vector(),
        n_controls=3,
        ode=ode,
        agents=(second, third),
        policies=((0, lambda t, x: lead_control(p1, t, x[1])),),
        channels=(
            Channel("1", (0, 1), 1, None, 0),
            Channel("2", (2, 3), 3, "2", 1),
            Channel("3", (4, 5), 5, "3", 2),
        ),
    )


@dataclass(frozen=True)
class SaccParams:
    """Gap-tracking cruise control against a constant-speed lead.

    State is (z, v): gap to the lead and own speed, with z' = v_lead - v and
    v' = u (force normalized away). Illustrative numbers, small chain gains
    for conservative braking; the control box is tight on purpose.
    """

    v_lead: float = 13.89
    l_p: float = 10.0
    gap0: float = 150.0
    v0: float = 24.0
    k1: float = 0.1
    k2: float = 0.1
    feas_gain: float = 0.1
    epsilon: float = 1e-10
    a0: float = 0.0
    u_min: float = -1.178
    u_max: float = 1.178
    relax_weight: float = 1.0

    def __post_init__(self):
        if self.v_lead <= 0.0 or self.v0 <= 0.0:
            raise ConfigurationError("speeds must be positive")
        if self.l_p <= 0.0:
            raise ConfigurationError("safety gap must be positive")


def build_sacc(params: SaccParams = SaccParams()) -> Scenario:
    """Two-vehicle gap-keeping example with double-integrator-like ego.

    The barrier b = z - l_p has relative degree 2; its chain pieces are
    L_f b = v_lead - v, L_f^2 b = 0 and control coefficient -1. The
    feasibility margin is -u_min + (k1+k2)(v_lead - v) + k1*k2*(z - l_p)
    with drift derivative k1*k2*(v_lead - v) and control coefficient
    -(k1+k2). No speed-tracking objective: the cost is u^2 plus an inert
    slack term.
    """
    k1, k2 = params.k1, params.k2
    vp = params.v_lead

    def ode(t, x, u):
        return np.array([vp - x[1], u[0]])

    bundle = LieBundle(
        along_drift=(
            lambda t, z: vp - z[1],
            lambda t, z: 0.0,
        ),
        control_coeff=lambda t, z: np.array([-1.0]),
        margin_drift=lambda t, z: k1 * k2 * (vp - z[1]),
        margin_control=lambda t, z: np.array([-(k1 + k2)]),
    )
    model = SystemModel(
        n=2, q=1,
        drift=lambda t, z: np.array([vp - z[1], 0.0]),
        actuation=lambda t, z: np.array([[0.0], [1.0]]),
        lie=bundle,
    )

    def cost(t, z):
        return (np.array([[2.0, 0.0], [0.0, 2.0 * params.relax_weight]]),
                np.zeros(2))

    ego = Agent(
        name="1",
        control_index=0,
        model=model,
        view=lambda t, x, u: x.copy(),
        hocbf=HocbfSpec(barrier=lambda t, z: z[0] - params.l_p,
                        gains=(k1, k2)),
        bounds=ControlBounds(lower=[params.u_min], upper=[params.u_max]),
        feasibility=FeasibilitySpec(gain=params.feas_gain,
                                    epsilon=params.epsilon, a0=params.a0),
        cost=cost,
        clf=None,
    )
    return Scenario(
        name="sacc",
        state_names=("z", "v"),
        x0=np.array([params.gap0, params.v0]),
        n_controls=1,
        ode=ode,
        agents=(ego,),
        policies=(),
        channels=(Channel("1", (0, 1), 1, "1", 0),),
    )
