import math

import numpy as np
import pytest

from cbf_safe.rk45 import IntegrationError, integrate


def test_exponential_decay_single_interval():
    y = integrate(lambda t, y: -y, 0.0, [1.0], 0.1)
    assert y[0] == pytest.approx(math.exp(-0.1), rel=1e-7)


def test_zero_rhs_is_exact():
    y = integrate(lambda t, y: np.zeros_like(y), 0.0, [3.0, -2.0], 0.1)
    assert y.tolist() == [3.0, -2.0]


def test_zero_span_returns_initial_state():
    y = integrate(lambda t, y: -y, 1.0, [5.0], 1.0)
    assert y.tolist() == [5.0]


def test_sinusoid_forcing_accuracy():
    # v' = 2 sin(2 pi t): closed form v(t) = v0 + (1 - cos(2 pi t)) / pi
    v0 = 13.89
    y = np.array([v0])
    t = 0.0
    for k in range(300):
        y = integrate(lambda t, y: np.array([2.0 * math.sin(2.0 * math.pi * t)]),
                      t, y, t + 0.1)
        t = 0.1 * (k + 1)
        exact = v0 + (1.0 - math.cos(2.0 * math.pi * t)) / math.pi
        assert abs(y[0] - exact) <= 1e-5 * abs(exact)


def test_finite_time_blowup_underflows():
    # y' = y^2 from y(0)=1 blows up at t=1; the step must collapse
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: y * y, 0.0, [1.0], 2.0)


def test_negative_span_rejected():
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: -y, 1.0, [1.0], 0.0)
