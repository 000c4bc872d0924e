"""Finite-difference cross-checks of analytic Lie derivatives.

Scenario bundles carry hand-derived derivative callables; these helpers
compare each of them against a central difference taken along the model's
own drift (for time derivatives) or along actuation columns (for control
coefficients). Differencing along the straight line x + s*direction gives
exactly the directional derivative at s = 0, so no flow integration is
needed. Time is perturbed together with the state so explicitly
time-varying models are differenced consistently.

Directions are normalized to unit max-norm before differencing and the
estimate is scaled back; otherwise a fast drift (or a tiny actuation
column) would stretch (or starve) the step and lose accuracy against the
curvature of time-periodic signals.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import (
    ClfSpec,
    ControlBounds,
    HocbfSpec,
    SystemModel,
    feasibility_margin,
)


#: Differencing step. Directions are unit max-norm, the driving signals
#: have unit-order time scales and second derivatives, and the evaluated
#: quantities stay within 1e3 in magnitude, so 1e-4 keeps both the
#: curvature error (~h^2) and the roundoff error (~eps/h) far below the
#: 1e-5 acceptance line.
FD_STEP = 1e-4


def directional_diff(fn, t: float, x: np.ndarray, t_dir: float,
                     x_dir: np.ndarray, h: float) -> float:
    """Central difference of fn along the (time, state) direction, step h.

    The direction is normalized to unit max-norm internally; the returned
    value is the derivative along the direction as given.
    """
    x = np.asarray(x, dtype=float)
    x_dir = np.asarray(x_dir, dtype=float)
    norm = max(abs(t_dir), float(np.max(np.abs(x_dir))) if x_dir.size else 0.0)
    if norm == 0.0:
        return 0.0
    td, xd = t_dir / norm, x_dir / norm
    return norm * (fn(t + h * td, x + h * xd)
                   - fn(t - h * td, x - h * xd)) / (2.0 * h)


def _rel(analytic: float, estimate: float) -> float:
    return abs(estimate - analytic) / max(1.0, abs(analytic))


def lie_derivative_errors(model: SystemModel, hocbf: HocbfSpec,
                          bounds: Optional[ControlBounds], t: float,
                          x: np.ndarray,
                          clf: Optional[ClfSpec] = None,
                          h: float = FD_STEP) -> dict:
    """Relative error of every analytic Lie derivative at one state.

    Keys: chain_<i> for the i-th drift derivative of the barrier,
    control_coeff_<l> per actuation column, margin_drift /
    margin_control_<l> when bounds are given, clf_drift / clf_control_<l>
    when a Lyapunov spec is given. Errors are
    |fd - analytic| / max(1, |analytic|).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(model.drift(t, x), dtype=float)
    g = np.asarray(model.actuation(t, x), dtype=float)
    lie = model.lie
    errors = {}

    def along_drift(fn):
        return directional_diff(fn, t, x, 1.0, v, h)

    def along_column(fn, col):
        return directional_diff(fn, t, x, 0.0, g[:, col], h)

    levels = [hocbf.barrier] + [lie.along_drift[i] for i in range(hocbf.m - 1)]
    for i in range(hocbf.m):
        analytic = float(lie.along_drift[i](t, x))
        errors[f"chain_{i + 1}"] = _rel(analytic, along_drift(levels[i]))

    coeff = np.atleast_1d(np.asarray(lie.control_coeff(t, x), dtype=float))
    top = levels[hocbf.m - 1]
    for col in range(model.q):
        errors[f"control_coeff_{col}"] = _rel(float(coeff[col]),
                                              along_column(top, col))

    if bounds is not None and lie.margin_drift is not None:
        def margin_fn(tt, xx):
            return feasibility_margin(hocbf, model, bounds, tt, xx)

        analytic = float(lie.margin_drift(t, x))
        errors["margin_drift"] = _rel(analytic, along_drift(margin_fn))
        mcoef = np.atleast_1d(np.asarray(lie.margin_control(t, x),
                                         dtype=float))
        for col in range(model.q):
            errors[f"margin_control_{col}"] = _rel(float(mcoef[col]),
                                                   along_column(margin_fn, col))

    if clf is not None and lie.clf_drift is not None:
        analytic = float(lie.clf_drift(t, x))
        errors["clf_drift"] = _rel(analytic, along_drift(clf.lyapunov))
        ccoef = np.atleast_1d(np.asarray(lie.clf_control(t, x), dtype=float))
        for col in range(model.q):
            errors[f"clf_control_{col}"] = _rel(float(ccoef[col]),
                                                along_column(clf.lyapunov, col))
    return errors
