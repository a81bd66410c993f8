"""Inexact variable-metric proximal solvers for l1/l2-ratio sparse
optimization, with dual semi-smooth Newton subproblem solvers, verifiable
inexactness certificates, tolerance-schedule validation, and
convergence-rate diagnostics.
"""

from .problem import (
    BallConstrained,
    BoxLasso,
    IterateState,
    ProblemInstance,
    criticality_residual,
    eval_F,
    eval_ck,
)
from .schedules import (
    Constant,
    Exponential,
    GammaRule,
    Polynomial,
    PowerFloor,
    ToleranceSchedule,
    epsilon_at,
    validate_schedule,
)
from .solver import (
    ErrorCertificate,
    MetricPolicy,
    Reject,
    SolveTrace,
    SubStep,
    TerminationRule,
    TraceRow,
    check_error_criterion,
    descent_check,
    run,
)

__all__ = [
    "BallConstrained",
    "BoxLasso",
    "Constant",
    "ErrorCertificate",
    "Exponential",
    "GammaRule",
    "IterateState",
    "MetricPolicy",
    "Polynomial",
    "PowerFloor",
    "ProblemInstance",
    "Reject",
    "SolveTrace",
    "SubStep",
    "TerminationRule",
    "ToleranceSchedule",
    "TraceRow",
    "check_error_criterion",
    "criticality_residual",
    "descent_check",
    "epsilon_at",
    "eval_F",
    "eval_ck",
    "run",
    "validate_schedule",
]

__version__ = "0.1.0"
