"""Adaptive Dormand-Prince 5(4) integration, endpoint only.

Seven-stage explicit Runge-Kutta pair: the fifth-order solution propagates
and the embedded fourth-order difference drives the step size. Standard
error-per-step control with an RMS norm over atol + rtol*|y| scales. No
dense output; callers integrate one control interval at a time and only the
endpoint matters.
"""

from __future__ import annotations

import numpy as np

# Butcher tableau (nodes, stage weights, propagating weights, error weights)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                11 / 84, 0.0])
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
                 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    """Adaptive stepping failed (step-size underflow or step budget)."""


def integrate(rhs, t0: float, y0, t1: float, rtol: float = 1e-7,
              atol: float = 1e-9, min_step: float = 1e-12,
              max_steps: int = 100000) -> np.ndarray:
    """Endpoint of the IVP y' = rhs(t, y), y(t0) = y0, at t = t1.

    Raises IntegrationError when the accepted step would fall below
    min_step seconds (expected near singularities of the right-hand side)
    or the step budget runs out.
    """
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    span = t1 - t0
    if span < 0.0:
        raise IntegrationError("integration span is negative")
    if span == 0.0:
        return y
    t = t0
    h = span
    k = np.empty((7, y.size))
    for _ in range(max_steps):
        if t >= t1:
            return y
        remaining = t1 - t
        # stretch marginally short steps onto the endpoint so roundoff
        # never leaves an unintegrable sliver of the span
        last = h >= remaining * (1.0 - 1e-12)
        if last:
            h = remaining
        if h < min_step:
            raise IntegrationError(
                f"step size underflow ({h:.3e} s) at t={t:.9g}"
            )
        k[0] = rhs(t, y)
        for s in range(1, 7):
            ys = y + h * (np.asarray(_A[s]) @ k[:s])
            k[s] = rhs(t + _C[s] * h, ys)
        y_new = y + h * (_B5 @ k)
        err_vec = h * (_ERR @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t1 if last else t + h
            y = y_new
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err ** -0.2)
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        h *= factor
    raise IntegrationError(f"step budget exhausted at t={t:.9g}")
