"""Safety-critical control via barrier-function QPs with a
feasibility-guaranteeing auxiliary barrier, plus a batch vehicle simulator.
"""

from .core import (
    ClfSpec,
    ConfigurationError,
    ConstraintRow,
    ControlBounds,
    DomainError,
    FeasibilityLossError,
    FeasibilitySpec,
    HocbfSpec,
    LieBundle,
    SystemModel,
    aux_dot,
    chain_coefficients,
    check_sign_consistency,
    clf_constraint_row,
    feasibility_margin,
    feasibility_row,
    hocbf_constraint_row,
    psi_sequence,
    sup_control,
)
from .qp import QpProblem, QpSolution, solve, verify_kkt
from .rk45 import IntegrationError, integrate
from .sim import Agent, Channel, Scenario, SimConfig, SimTrace, run
from .scenarios import (
    PlatoonState,
    SaccParams,
    VehicleParams,
    acc_case_params,
    build_acc_platoon,
    build_sacc,
    lead_control,
    resistance_force,
    resistance_slope,
)

__all__ = [
    "Agent",
    "Channel",
    "ClfSpec",
    "ConfigurationError",
    "ConstraintRow",
    "ControlBounds",
    "DomainError",
    "FeasibilityLossError",
    "FeasibilitySpec",
    "HocbfSpec",
    "IntegrationError",
    "LieBundle",
    "PlatoonState",
    "QpProblem",
    "QpSolution",
    "SaccParams",
    "Scenario",
    "SimConfig",
    "SimTrace",
    "SystemModel",
    "VehicleParams",
    "acc_case_params",
    "aux_dot",
    "build_acc_platoon",
    "build_sacc",
    "chain_coefficients",
    "check_sign_consistency",
    "clf_constraint_row",
    "feasibility_margin",
    "feasibility_row",
    "hocbf_constraint_row",
    "integrate",
    "lead_control",
    "psi_sequence",
    "resistance_force",
    "resistance_slope",
    "run",
    "solve",
    "sup_control",
    "verify_kkt",
]

__version__ = "0.1.0"
