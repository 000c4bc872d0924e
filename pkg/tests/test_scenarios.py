import math

import numpy as np
import pytest

from cbf_safe.core import ConfigurationError, DomainError, hocbf_constraint_row
from cbf_safe.diagnostics import lie_derivative_errors
from cbf_safe.scenarios import (
    PlatoonState,
    SaccParams,
    VehicleParams,
    acc_case_params,
    build_acc_platoon,
    build_sacc,
    lead_accel,
    lead_control,
    resistance_force,
    resistance_slope,
)
from cbf_safe.sim import SimConfig, run


@pytest.fixture(scope="module")
def acc():
    return build_acc_platoon(case=1)


def test_resistance_force_values():
    p = VehicleParams(mass=1650.0)
    assert resistance_force(p, 10.0) == pytest.approx(75.1, abs=1e-12)
    assert resistance_force(p, 1e-9) == pytest.approx(0.1, abs=1e-7)
    assert resistance_slope(p, 20.0) == pytest.approx(15.0, abs=1e-12)
    with pytest.raises(DomainError):
        resistance_force(p, 0.0)
    with pytest.raises(DomainError):
        resistance_slope(p, -1.0)


def test_lead_control_values():
    p = VehicleParams(mass=1500.0)
    assert lead_control(p, 0.0, 13.89) == pytest.approx(117.783025,
                                                        abs=1e-9)
    assert lead_control(p, 0.25, 20.0) == pytest.approx(
        2.0 * 1500.0 + resistance_force(p, 20.0), rel=1e-12)
    assert lead_accel(0.5) == pytest.approx(0.0, abs=1e-12)


def test_vehicle_params_validation():
    with pytest.raises(ConfigurationError):
        VehicleParams(mass=0.0)
    with pytest.raises(ConfigurationError):
        VehicleParams(mass=1000.0, f1=-1.0)
    with pytest.raises(ConfigurationError):
        VehicleParams(mass=1000.0, v_desired=0.0)


def test_platoon_state_validation():
    with pytest.raises(ConfigurationError):
        PlatoonState(positions=(0.0, 10.0, -190.0),
                     velocities=(10.0, 10.0, 10.0))
    with pytest.raises(ConfigurationError):
        PlatoonState(positions=(0.0, -100.0), velocities=(10.0, 0.0))
    state = PlatoonState(positions=(0.0, -100.0, -190.0),
                         velocities=(13.89, 8.0, 14.0))
    assert state.vector().tolist() == [0.0, 13.89, -100.0, 8.0, -190.0, 14.0]


def test_build_acc_initial_barriers(acc):
    u = np.zeros(3)
    z2 = acc.agents[0].view(0.0, acc.x0, u)
    z3 = acc.agents[1].view(0.0, acc.x0, u)
    assert acc.agents[0].hocbf.barrier(0.0, z2) == pytest.approx(90.0)
    assert acc.agents[1].hocbf.barrier(0.0, z3) == pytest.approx(80.0)


def test_build_acc_misordered_positions():
    with pytest.raises(ConfigurationError):
        build_acc_platoon(case=1, initial=PlatoonState(
            positions=(0.0, 10.0, -190.0), velocities=(13.89, 8.0, 14.0)))


def test_margin_control_sign_second_vehicle(acc):
    # slope 9 N s/m at 8 m/s: 9/M^2 - 2/M < 0, so the most favorable
    # control is full braking
    agent = acc.agents[0]
    z = agent.view(0.0, acc.x0, np.zeros(3))
    lg = float(agent.model.lie.margin_control(0.0, z)[0])
    expected = 9.0 / 1650.0**2 - 2.0 / 1650.0
    assert lg == pytest.approx(expected, rel=1e-12)
    assert lg < 0.0


def test_case_parameter_sets():
    _, p2, p3 = acc_case_params(1)
    assert (p2.c_decel, p3.c_decel) == (0.4, 0.35)
    assert p2.feas_gain == p3.feas_gain == 0.1
    _, p2, p3 = acc_case_params(2)
    assert (p2.c_decel, p3.c_decel) == (0.2, 0.25)
    assert p2.feas_gain == p3.feas_gain == 0.05
    assert (p2.c_accel, p3.c_accel) == (0.4, 0.35)
    with pytest.raises(ConfigurationError):
        acc_case_params(3)


def _random_model_states(rng, agent, n):
    if agent.model.n == 2:   # gap-keeping ego
        return [np.array([rng.uniform(11, 300), rng.uniform(1, 40)])
                for _ in range(n)]
    states = []
    for _ in range(n):
        lead_x = rng.uniform(-50.0, 200.0)
        z = [lead_x, rng.uniform(5.0, 30.0),
             lead_x - rng.uniform(11.0, 150.0), rng.uniform(5.0, 30.0)]
        if agent.model.n == 5:
            z.append(rng.uniform(-4.0, 4.0))
        states.append(np.array(z))
    return states


def test_lie_derivatives_match_finite_differences(acc):
    rng = np.random.default_rng(42)
    sacc_agent = build_sacc(SaccParams()).agents[0]
    for agent in (sacc_agent, acc.agents[0], acc.agents[1]):
        for z in _random_model_states(rng, agent, 100):
            t = float(rng.uniform(0.0, 30.0))
            errors = lie_derivative_errors(agent.model, agent.hocbf,
                                           agent.bounds, t, z, agent.clf)
            worst = max(errors.values())
            assert worst < 1e-5, (agent.name, errors)


def test_generic_row_matches_nested_recursion(acc):
    # build the level-2 expression by the literal recursion
    # psi2 = d(psi1)/dt + k2*psi1 with psi1 = d(b)/dt + k1*b and compare
    # against the assembled row at random states and controls
    rng = np.random.default_rng(99)
    for agent in acc.agents:
        k1, k2 = agent.hocbf.gains
        lie = agent.model.lie
        for z in _random_model_states(rng, agent, 100):
            t = float(rng.uniform(0.0, 30.0))
            u = rng.uniform(-7000.0, 7000.0)
            b = agent.hocbf.barrier(t, z)
            lf1 = lie.along_drift[0](t, z)
            lf2 = lie.along_drift[1](t, z)
            lg = float(lie.control_coeff(t, z)[0])
            psi1 = lf1 + k1 * b
            nested = lf2 + lg * u + k1 * lf1 + k2 * psi1
            row = hocbf_constraint_row(agent.hocbf, agent.model, t, z)
            assembled = float(row.coeffs[0] * u) - row.bound
            assert abs(assembled - nested) <= 1e-12 * max(1.0, abs(nested))


def test_lead_vehicle_open_loop_velocity(acc):
    trace = run(acc, SimConfig(t_end=2.0, dt=0.1))
    for k in range(trace.n_samples):
        t = trace.t[k]
        exact = 13.89 + (1.0 - math.cos(2.0 * math.pi * t)) / math.pi
        assert trace.states[k, 1] == pytest.approx(exact, abs=2e-6)


def test_third_vehicle_reads_lead_acceleration(acc):
    agent = acc.agents[1]
    u = np.array([0.0, 2000.0, 0.0])
    z = agent.view(0.0, acc.x0, u)
    expected = (2000.0 - resistance_force(VehicleParams(mass=1650.0), 8.0)) / 1650.0
    assert z[4] == pytest.approx(expected, rel=1e-12)
