"""Domain types and constraint mathematics for barrier/Lyapunov QP control.

A controller for a control-affine system ``xdot = f(t, x) + g(t, x) u`` is
assembled here from three kinds of ingredients:

* a safety barrier ``b(x) >= 0`` of relative degree m, enforced through the
  nested derivative chain ``psi_i = d(psi_{i-1})/dt + k_i psi_{i-1}`` with
  linear class-kappa gains ``k_i > 0`` (``hocbf_constraint_row``);
* an optional Lyapunov function driving the state to a target, relaxed by a
  slack variable delta (``clf_constraint_row``);
* a feasibility barrier on the margin between the safety row and the control
  box: ``feasibility_margin`` is the highest-order chain value evaluated at
  the admissible control that is most favorable to it (``sup_control``).
  Scaling that margin by ``exp(a)``, with the auxiliary variable ``a``
  following the closed-form rate of ``aux_dot``, yields a first-order barrier
  row (``feasibility_row``) that is compatible with the safety row and the
  control box whenever the margin is positive, so the per-interval QP stays
  solvable.

Everything in this module is a pure function of its inputs; specs and models
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Callables of (t, x): scalars (barriers, Lyapunov values, Lie derivatives
# along the drift) or vectors (coefficients of u contributed by g's columns).
ScalarFn = Callable[[float, np.ndarray], float]
VectorFn = Callable[[float, np.ndarray], np.ndarray]


class ConfigurationError(ValueError):
    """Specs, dimensions or initial conditions are inconsistent."""


class DomainError(ValueError):
    """A quantity was evaluated outside its physical domain."""


class FeasibilityLossError(RuntimeError):
    """The feasibility margin reached zero, where the auxiliary-variable
    dynamics are singular and the solvability guarantee no longer holds."""


@dataclass(frozen=True)
class ControlBounds:
    """Componentwise box on the control input. All entries must be finite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ConfigurationError(
                f"bound shapes differ: {lo.shape} vs {hi.shape}"
            )
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ConfigurationError("control bounds must be finite")
        if np.any(lo > hi):
            raise ConfigurationError("lower bound exceeds upper bound")

    @property
    def q(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class LieBundle:
    """Analytic Lie derivatives for one controller, all callables of (t, x).

    along_drift[i] is the (i+1)-th derivative of the barrier along the drift
    (the control-free part), so ``len(along_drift) == m`` and the last entry
    is the order-m term in which the control finally appears; control_coeff
    gives that control's coefficient vector (shape (q,)).

    margin_drift / margin_control are the same pair for the feasibility
    margin, which has relative degree one. clf_drift / clf_control are the
    first derivatives of the Lyapunov function when a tracking objective is
    present.
    """

    along_drift: tuple
    control_coeff: VectorFn
    margin_drift: Optional[ScalarFn] = None
    margin_control: Optional[VectorFn] = None
    clf_drift: Optional[ScalarFn] = None
    clf_control: Optional[VectorFn] = None


@dataclass(frozen=True)
class SystemModel:
    """Control-affine model ``xdot = f(t, x) + g(t, x) u`` seen by one
    controller, together with the analytic Lie derivatives its constraint
    rows need.

    drift and actuation may depend on time through known exogenous schedules
    (a lead vehicle's published maneuver, a frozen measured signal); set
    ``time_varying`` when they do so derivative cross-checks perturb time
    alongside the state.
    """

    n: int
    q: int
    drift: VectorFn
    actuation: VectorFn
    lie: LieBundle
    time_varying: bool = False

    def check_shapes(self, t: float, x: np.ndarray) -> None:
        """Raise unless drift/actuation evaluate to (n,) and (n, q) at x."""
        f = np.asarray(self.drift(t, x), dtype=float)
        g = np.asarray(self.actuation(t, x), dtype=float)
        if f.shape != (self.n,):
            raise ConfigurationError(f"drift shape {f.shape} != ({self.n},)")
        if g.shape != (self.n, self.q):
            raise ConfigurationError(
                f"actuation shape {g.shape} != ({self.n}, {self.q})"
            )


@dataclass(frozen=True)
class HocbfSpec:
    """Safety requirement ``barrier(x) >= 0`` of relative degree m.

    gains holds the m positive slopes of the linear class-kappa functions,
    one per chain level; m is implied by its length.
    """

    barrier: ScalarFn
    gains: tuple

    def __post_init__(self):
        gains = tuple(float(k) for k in self.gains)
        object.__setattr__(self, "gains", gains)
        if len(gains) < 1:
            raise ConfigurationError("at least one chain gain is required")
        if any(k <= 0.0 for k in gains):
            raise ConfigurationError("chain gains must be positive")

    @property
    def m(self) -> int:
        return len(self.gains)


@dataclass(frozen=True)
class ClfSpec:
    """Exponentially stabilizing Lyapunov function with a relaxation slack.

    decay is the convergence rate multiplying V in the row; relax_weight is
    the cost weight on the squared slack. The quadratic sandwich constants of
    the textbook definition are existence conditions only and carry no
    operational role here (unity in the vehicle scenarios).
    """

    lyapunov: ScalarFn
    decay: float
    relax_weight: float

    def __post_init__(self):
        if self.decay <= 0.0:
            raise ConfigurationError("decay rate must be positive")
        if self.relax_weight <= 0.0:
            raise ConfigurationError("relaxation weight must be positive")


@dataclass(frozen=True)
class FeasibilitySpec:
    """First-order barrier on the exp(a)-scaled feasibility margin.

    gain is the linear class-kappa slope on the scaled margin; epsilon is the
    strict satisfaction floor of the row (positive, arbitrarily small); a0 is
    the initial value of the auxiliary log-scale variable. The multiplier
    exp(a) is positive for every finite a by construction.
    """

    gain: float
    epsilon: float
    a0: float

    def __post_init__(self):
        if self.gain <= 0.0:
            raise ConfigurationError("feasibility gain must be positive")
        if self.epsilon <= 0.0:
            raise ConfigurationError("epsilon must be positive")
        if not math.isfinite(self.a0):
            raise ConfigurationError("a0 must be finite")


@dataclass(frozen=True)
class ConstraintRow:
    """One linear constraint over the decision vector (u_1..u_q, delta).

    The row states ``coeffs . y  sense  bound`` exactly as assembled; no
    scaling is applied after assembly. label records provenance
    (hocbf | clf | feasibility | bounds).
    """

    coeffs: np.ndarray
    bound: float
    sense: str
    label: str

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "bound", float(self.bound))
        if self.sense not in (">=", "<="):
            raise ConfigurationError(f"unknown sense {self.sense!r}")
        if not (np.isfinite(c).all() and math.isfinite(self.bound)):
            raise ConfigurationError("constraint row must be finite")

    def residual(self, y: np.ndarray) -> float:
        """Slack at decision point y; nonnegative iff the row is satisfied."""
        v = float(self.coeffs @ np.asarray(y, dtype=float))
        return v - self.bound if self.sense == ">=" else self.bound - v

    def as_leq(self):
        """The row rewritten as ``a . y <= b``; returns (a, b)."""
        if self.sense == "<=":
            return self.coeffs, self.bound
        return -self.coeffs, -self.bound


def chain_coefficients(gains: Sequence[float]) -> np.ndarray:
    """Coefficients of the expanded barrier-derivative chain.

    With linear class-kappa gains the level-m chain value is the operator
    product (D + k_1)...(D + k_m) applied to the barrier, D being the time
    derivative. Returns c of length m+1 where c[j] multiplies the j-th
    derivative of the barrier (c[m] == 1 on the control-carrying order).
    """
    c = np.array([1.0])
    for k in gains:
        c = np.convolve(c, [1.0, float(k)])
    return c[::-1]


def _drift_derivatives(spec: HocbfSpec, model: SystemModel, t: float,
                       x: np.ndarray, orders: int) -> np.ndarray:
    """Barrier derivatives along the drift, orders 0..orders-1."""
    vals = [float(spec.barrier(t, x))]
    for i in range(orders - 1):
        vals.append(float(model.lie.along_drift[i](t, x)))
    return np.array(vals)


def psi_sequence(spec: HocbfSpec, model: SystemModel, t: float,
                 x: np.ndarray) -> np.ndarray:
    """Values psi_0..psi_{m-1} of the nested barrier chain at one state.

    psi_0 is the barrier itself and psi_i adds the i-th drift derivative
    plus the lower-level terms weighted by the chain gains. All m values are
    control-free; the control only appears at level m.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ConfigurationError(
            f"state shape {x.shape} does not match model dimension {model.n}"
        )
    derivs = _drift_derivatives(spec, model, t, x, spec.m)
    out = np.empty(spec.m)
    for i in range(spec.m):
        c = chain_coefficients(spec.gains[:i])
        out[i] = float(np.dot(c, derivs[: i + 1]))
    return out


def hocbf_constraint_row(spec: HocbfSpec, model: SystemModel, t: float,
                         x: np.ndarray) -> ConstraintRow:
    """Row keeping the level-m chain value nonnegative, linear in u.

    The constant part collects the order-m drift derivative and every
    lower-order term produced by expanding the nested gains; the u
    coefficients come from the actuation columns at order m-1. The slack
    coefficient is zero: safety is a hard constraint.
    """
    x = np.asarray(x, dtype=float)
    m = spec.m
    derivs = _drift_derivatives(spec, model, t, x, m + 1)
    c = chain_coefficients(spec.gains)
    constant = float(np.dot(c[:m], derivs[:m])) + derivs[m]
    ucoef = np.atleast_1d(np.asarray(model.lie.control_coeff(t, x),
                                     dtype=float))
    coeffs = np.concatenate([ucoef, [0.0]])
    return ConstraintRow(coeffs=coeffs, bound=-constant, sense=">=",
                         label="hocbf")


def clf_constraint_row(spec: ClfSpec, model: SystemModel, t: float,
                       x: np.ndarray) -> ConstraintRow:
    """Relaxed Lyapunov decrease row: V's derivative plus decay*V <= delta.

    The slack coefficient is -1, so the row can always be satisfied at the
    price of a larger delta in the cost.
    """
    x = np.asarray(x, dtype=float)
    value = float(spec.lyapunov(t, x))
    if value < 0.0:
        raise ConfigurationError(f"Lyapunov value {value} is negative")
    lf = float(model.lie.clf_drift(t, x))
    lg = np.atleast_1d(np.asarray(model.lie.clf_control(t, x), dtype=float))
    coeffs = np.concatenate([lg, [-1.0]])
    return ConstraintRow(coeffs=coeffs, bound=-(lf + spec.decay * value),
                         sense="<=", label="clf")


def sup_control(coeffs: np.ndarray, bounds: ControlBounds) -> np.ndarray:
    """Admissible control attaining sup over the box of ``coeffs . u``.

    Componentwise: the upper bound where the coefficient is positive, the
    lower bound otherwise. A zero coefficient contributes nothing either way
    and is tie-broken to the lower bound for determinism.
    """
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.shape != bounds.lower.shape:
        raise ConfigurationError(
            f"coefficient shape {coeffs.shape} does not match bounds"
        )
    return np.where(coeffs > 0.0, bounds.upper, bounds.lower)


def feasibility_margin(spec: HocbfSpec, model: SystemModel,
                       bounds: ControlBounds, t: float,
                       x: np.ndarray) -> float:
    """Level-m chain value at the most favorable admissible control.

    Positive iff the safety row and the control box intersect at this state,
    i.e. iff some admissible control satisfies the hard safety constraint.
    """
    x = np.asarray(x, dtype=float)
    m = spec.m
    derivs = _drift_derivatives(spec, model, t, x, m + 1)
    c = chain_coefficients(spec.gains)
    ucoef = np.atleast_1d(np.asarray(model.lie.control_coeff(t, x),
                                     dtype=float))
    u_best = sup_control(ucoef, bounds)
    return float(np.dot(c[:m], derivs[:m]) + derivs[m]
                 + float(ucoef @ u_best))


def aux_dot(model: SystemModel, t: float, x: np.ndarray, margin: float,
            u_sup: np.ndarray) -> float:
    """Closed-form rate of the auxiliary log-scale variable.

    Chosen so that the scaled margin's derivative collapses at the most
    favorable control: exp(a) * (rate*margin + drift term + control
    term @ u_sup) == 0 identically. With the exponential scaling the factor
    exp(a) cancels and the rate is independent of a itself.

    Requires a strictly positive margin; at margin <= 0 the rate is singular
    and the solvability guarantee is already lost.
    """
    if margin <= 0.0:
        raise FeasibilityLossError(
            f"feasibility margin {margin:.6g} <= 0 at t={t:.6g}; "
            "auxiliary dynamics are singular"
        )
    lf = float(model.lie.margin_drift(t, x))
    lg = np.atleast_1d(np.asarray(model.lie.margin_control(t, x),
                                  dtype=float))
    return -(lf + float(lg @ u_sup)) / margin


def feasibility_row(spec: FeasibilitySpec, model: SystemModel, t: float,
                    x: np.ndarray, a: float, a_rate: float,
                    margin: float) -> ConstraintRow:
    """First-order barrier row on the exp(a)-scaled feasibility margin.

    States exp(a)*(a_rate*margin + margin drift + margin control @ u
    + gain*margin) >= epsilon, linear in u with zero slack coefficient.
    With a_rate from aux_dot the row is algebraically the reduced form
    exp(a)*(margin control @ (u - u_sup)) + gain*exp(a)*margin >= epsilon,
    which the most favorable control satisfies whenever
    gain*exp(a)*margin >= epsilon.
    """
    x = np.asarray(x, dtype=float)
    scale = math.exp(a)
    lf = float(model.lie.margin_drift(t, x))
    lg = np.atleast_1d(np.asarray(model.lie.margin_control(t, x),
                                  dtype=float))
    coeffs = np.concatenate([scale * lg, [0.0]])
    constant = scale * (a_rate * margin + lf + spec.gain * margin)
    return ConstraintRow(coeffs=coeffs, bound=spec.epsilon - constant,
                         sense=">=", label="feasibility")


def check_sign_consistency(model: SystemModel, t: float, x: np.ndarray,
                           reference_signs: np.ndarray) -> bool:
    """True iff every control coefficient keeps its initial sign (or is 0).

    reference_signs are captured at the start of a run. A zero current
    component is treated as sign-preserving; callers log it rather than
    fail. Monitoring only: a sign change voids the feasibility-margin
    construction and is reported as a trace event.
    """
    current = np.atleast_1d(np.asarray(model.lie.control_coeff(t, x),
                                       dtype=float))
    reference_signs = np.atleast_1d(np.asarray(reference_signs, dtype=float))
    cur_signs = np.sign(current)
    return bool(np.all((cur_signs == 0.0) | (cur_signs == reference_signs)))
