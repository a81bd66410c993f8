"""Problem model: ratio objectives (f + h)/g for the two shipped variants.

Both variants minimize a ratio with denominator g = ||.||_2 over
Omega = R^n \\ {0}:

  box_lasso:         (lam*||x||_1 + i_[lower,upper](x) + 0.5*||Ax-b||^2) / ||x||
  ball_constrained:  (||x||_1 + i_{||Ax-b|| <= sigma}) / ||x||

Infeasibility and x = 0 are encoded as +inf so traces serialize cleanly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePoint, InvariantViolation, ZeroPoint

# absorbs rounding in ||Ax-b|| when testing ball membership; box tests are exact
BALL_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class BoxLasso:
    lam: float
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class BallConstrained:
    sigma: float


@dataclass
class ProblemInstance:
    """Dense data (A, b) plus the variant parameters.

    For the ball variant, ``x_feas`` optionally carries a strictly feasible
    anchor for the retraction; when absent the minimum-norm interpolant is
    computed on demand by the subproblem solver.
    """

    A: np.ndarray
    b: np.ndarray
    variant: BoxLasso | BallConstrained
    x_feas: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise InvariantViolation("A must be a nonempty m-by-n matrix")
        if self.b.shape != (self.A.shape[0],):
            raise InvariantViolation("b must have length m")
        v = self.variant
        if isinstance(v, BoxLasso):
            lower = np.asarray(v.lower, dtype=float)
            upper = np.asarray(v.upper, dtype=float)
            if lower.shape != (self.n,) or upper.shape != (self.n,):
                raise InvariantViolation("box bounds must have length n")
            if not v.lam > 0:
                raise InvariantViolation("lam must be positive")
            if not (np.all(lower < 0) and np.all(upper > 0)):
                raise InvariantViolation(
                    "box must contain 0 in its interior (lower < 0 < upper)"
                )
            object.__setattr__(v, "lower", lower)
            object.__setattr__(v, "upper", upper)
        elif isinstance(v, BallConstrained):
            if not v.sigma > 0:
                raise InvariantViolation("sigma must be positive")
            if not np.linalg.norm(self.b) > v.sigma:
                raise InvariantViolation("||b|| must exceed sigma")
            if self.x_feas is not None:
                self.x_feas = np.asarray(self.x_feas, dtype=float)
                if self.x_feas.shape != (self.n,):
                    raise InvariantViolation("x_feas must have length n")
                r = np.linalg.norm(self.A @ self.x_feas - self.b)
                if not r < v.sigma:
                    raise InvariantViolation(
                        "x_feas must be strictly feasible (||A x_feas - b|| < sigma)"
                    )
        else:
            raise InvariantViolation(f"unknown variant {type(v).__name__}")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def variant_name(self):
        return "box_lasso" if isinstance(self.variant, BoxLasso) else "ball_constrained"


@dataclass
class IterateState:
    """Snapshot of one accepted outer iterate."""

    x: np.ndarray
    f_val: float
    g_val: float
    c: float
    y: np.ndarray
    gamma: float
    k: int


def _numerator(inst, x):
    """f(x) + h(x), or +inf outside the constraint set."""
    v = inst.variant
    if isinstance(v, BoxLasso):
        if np.any(x < v.lower) or np.any(x > v.upper):
            return math.inf
        r = inst.A @ x - inst.b
        return v.lam * np.abs(x).sum() + 0.5 * float(r @ r)
    if np.linalg.norm(inst.A @ x - inst.b) > v.sigma + BALL_FEAS_TOL:
        return math.inf
    return float(np.abs(x).sum())


def eval_F(inst, x):
    """Ratio objective value; +inf for infeasible x or x = 0."""
    x = np.asarray(x, dtype=float)
    g = np.linalg.norm(x)
    if g == 0.0:
        return math.inf
    num = _numerator(inst, x)
    if num == math.inf:
        return math.inf
    return num / g


def eval_ck(inst, x):
    """Ratio value c = F(x) and the denominator subgradient y = x/||x||.

    g = ||.|| is differentiable away from 0, so the subgradient is unique
    and has unit norm.  Raises ZeroPoint at the origin and InfeasiblePoint
    outside dom f.
    """
    x = np.asarray(x, dtype=float)
    g = np.linalg.norm(x)
    if g == 0.0:
        raise ZeroPoint("ratio objective is undefined at the origin")
    num = _numerator(inst, x)
    if num == math.inf:
        raise InfeasiblePoint("point violates the numerator constraint set")
    return num / g, x / g


def feasibility_violation(inst, x):
    """Signed constraint residual of x (<= 0 means feasible).

    Ball variant: ||Ax - b|| - sigma.  Box variant: the largest signed bound
    violation, max(lower - x, x - upper)."""
    v = inst.variant
    if isinstance(v, BallConstrained):
        return float(np.linalg.norm(inst.A @ x - inst.b) - v.sigma)
    return float(max(np.max(v.lower - x), np.max(x - v.upper)))


def criticality_residual(inst, delta, delta_err, step, gamma, metric):
    """Diagnostic upper bound on the terminal stationarity residual.

    ||Delta|| + ||H_k step|| + delta_err, assembled from the last accepted
    subproblem certificate; zero iff the final subproblem was solved exactly
    with a zero step.
    """
    h_step = metric.apply(inst.A, gamma, np.asarray(step, dtype=float))
    return (
        float(np.linalg.norm(delta))
        + float(np.linalg.norm(h_step))
        + float(delta_err)
    )
