"""Outer loop: inexact variable-metric proximal gradient-subgradient solver.

Each outer iteration k evaluates the current ratio c_k = (f+h)(x)/g(x) and
the denominator subgradient y_k, then asks a subproblem solver for a point
x_{k+1} together with an error pair (Delta_k, delta_k) certifying

    ||Delta_k||^2 + |<Delta_k, x_{k+1}-x_k>| + delta_k  <=  eps_k * g(x_{k+1}),

where eps_k comes from the tolerance schedule.  Under that criterion the
objective satisfies the approximate descent inequality

    F(x_{k+1}) <= F(x_k) - ||x_{k+1}-x_k||^2_{2 H_k - L_h I} / (2 g(x_{k+1})) + eps_k,

which the loop re-checks at runtime (abort in verify mode, warn in bench
mode).  Setting the schedule identically to zero recovers the exact
variable-metric method.
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import InnerSolverFailure, InvariantViolation
from .problem import (
    IterateState,
    criticality_residual,
    eval_ck,
    eval_F,
    feasibility_violation,
)
from .schedules import GammaRule, ToleranceSchedule

DESCENT_SLACK = 1e-10

TRACE_COLUMNS = (
    "k",
    "F",
    "c",
    "eps",
    "gamma",
    "step_norm",
    "inner_iters",
    "cert_lhs",
    "cert_rhs",
    "feas_viol",
    "time_s",
)

TRACE_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# variable metric


@dataclass(frozen=True)
class MetricPolicy:
    """H_k = gamma_k * I ("identity") or gamma_k * (I + A^T A) ("gram")."""

    kind: str = "identity"
    gamma: GammaRule = GammaRule()

    def __post_init__(self):
        if self.kind not in ("identity", "gram"):
            raise ValueError(f"unknown metric kind {self.kind!r}")

    def gamma_at(self, k):
        return self.gamma.at(k)

    def apply(self, A, gamma, v):
        """H_k v."""
        if self.kind == "identity":
            return gamma * v
        return gamma * (v + A.T @ (A @ v))

    def weighted_norm_sq(self, A, gamma, v):
        """||v||^2_{H_k}."""
        if self.kind == "identity":
            return gamma * float(v @ v)
        Av = A @ v
        return gamma * (float(v @ v) + float(Av @ Av))


# ---------------------------------------------------------------------------
# certificates


@dataclass
class ErrorCertificate:
    """Witness of the inexactness criterion for one accepted step.

    lhs = ||delta_vec||^2 + |<delta_vec, step>| + delta_err and
    rhs = eps_k * g(x_next); acceptance requires lhs <= rhs.  ``step``
    (= x_next - x_k) is retained so the bound can be recomputed from raw
    parts after the fact.
    """

    delta_vec: np.ndarray
    delta_err: float
    step: np.ndarray
    lhs: float
    rhs: float


@dataclass(frozen=True)
class Reject:
    """Failed certificate attempt; carries the attempted bound for retry loops."""

    lhs: float
    rhs: float


def certificate_lhs(delta_vec, delta_err, step):
    d = np.asarray(delta_vec, dtype=float)
    return float(d @ d) + abs(float(d @ step)) + float(delta_err)


def check_error_criterion(cert, eps_k, g_next):
    """Recompute the criterion from the certificate's raw parts."""
    if not g_next > 0:
        raise ValueError("g(x_next) must be positive")
    lhs = certificate_lhs(cert.delta_vec, cert.delta_err, cert.step)
    return lhs <= eps_k * g_next


def descent_check(F_prev, F_next, step, gamma_k, A, metric, g_next, eps_k, L_h):
    """Approximate sufficient descent inequality, with absolute slack.

    F_next <= F_prev - ||step||^2_{2 H_k - L_h I} / (2 g_next) + eps_k.
    Requires 2 H_k - L_h I positive definite (L_h = 0 for both shipped
    splits).  Used as a runtime assertion only.
    """
    if not g_next > 0:
        raise ValueError("g(x_next) must be positive")
    step = np.asarray(step, dtype=float)
    quad = 2.0 * metric.weighted_norm_sq(A, gamma_k, step) - L_h * float(step @ step)
    return F_next <= F_prev - quad / (2.0 * g_next) + eps_k + DESCENT_SLACK


# ---------------------------------------------------------------------------
# subproblem solver interface


@dataclass
class SubStep:
    """One accepted inexact subproblem solution."""

    x_next: np.ndarray
    cert: ErrorCertificate
    inner_iters: int


class Subsolver(Protocol):
    """Produces certified approximate subproblem solutions.

    ``lipschitz_h`` is the gradient Lipschitz constant of the smooth part h
    in the (f, h) split this solver works with (0 when the quadratic sits
    inside f).  ``metric_kind`` names the metric the certificate construction
    assumes.  Instances may keep warm-start state and must not be shared
    between concurrent runs.
    """

    lipschitz_h: float
    metric_kind: str

    def solve(self, inst, state: IterateState, eps_k: float) -> SubStep: ...


# ---------------------------------------------------------------------------
# trace


@dataclass
class TraceRow:
    k: int
    F: float
    c: float
    eps: float
    gamma: float
    step_norm: float
    inner_iters: int
    cert_lhs: float
    cert_rhs: float
    feas_viol: float
    time_s: float
    # extra diagnostics, not part of the CSV schema
    g_next: float = math.nan
    delta_err: float = math.nan

    def csv_values(self):
        return [getattr(self, c) for c in TRACE_COLUMNS]


@dataclass
class SolveTrace:
    rows: list = field(default_factory=list)
    status: str = "unknown"  # converged | iteration_cap | inner_cap
    seed: int | None = None
    global_opt: bool = False
    final_x: np.ndarray | None = None
    final_F: float = math.nan
    final_residual: float = math.nan
    iterates: list | None = None

    @property
    def outer_iterations(self):
        return len(self.rows)

    @property
    def total_inner(self):
        return sum(r.inner_iters for r in self.rows)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# schema_version={TRACE_SCHEMA_VERSION}\n")
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in self.rows:
                vals = row.csv_values()
                fh.write(
                    ",".join(
                        str(v) if isinstance(v, int) else format(float(v), ".17g")
                        for v in vals
                    )
                    + "\n"
                )

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            header_seen = False
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if not header_seen:
                    if line.split(",") != list(TRACE_COLUMNS):
                        raise ValueError(f"unexpected trace header in {path}")
                    header_seen = True
                    continue
                parts = line.split(",")
                rows.append(
                    TraceRow(
                        k=int(parts[0]),
                        F=float(parts[1]),
                        c=float(parts[2]),
                        eps=float(parts[3]),
                        gamma=float(parts[4]),
                        step_norm=float(parts[5]),
                        inner_iters=int(parts[6]),
                        cert_lhs=float(parts[7]),
                        cert_rhs=float(parts[8]),
                        feas_viol=float(parts[9]),
                        time_s=float(parts[10]),
                    )
                )
        return cls(rows=rows, status="loaded")


# ---------------------------------------------------------------------------
# termination


@dataclass(frozen=True)
class TerminationRule:
    """Stopping tests, mirrored by the plain baseline.

    The combined relative test max(step/(1+||x||), dF/(1+|F|)) < rel_tol must
    hold on ``consecutive`` successive iterations; dF/(1+|F|) < f_tol_fast
    stops immediately.  Caps on outer iterations and on the cumulative inner
    Newton count are reported as distinct statuses.  When several conditions
    fire on the same iteration, the first in the order above is reported.
    """

    rel_tol: float = 1e-7
    consecutive: int = 3
    f_tol_fast: float = 1e-10
    max_outer: int = 50000
    max_total_inner: int | None = None


# ---------------------------------------------------------------------------
# the outer loop


def _invariant(ok, message, verify):
    if ok:
        return
    if verify:
        raise InvariantViolation(message)
    warnings.warn(message, RuntimeWarning, stacklevel=3)


def run(
    inst,
    subsolver,
    schedule: ToleranceSchedule,
    metric: MetricPolicy,
    init,
    term: TerminationRule = TerminationRule(),
    *,
    seed=None,
    verify_invariants=True,
    keep_iterates=False,
):
    """Drive the outer loop from a feasible nonzero ``init`` to termination.

    Every accepted iterate stays feasible and nonzero; the per-iteration
    certificate and the approximate descent inequality are re-checked as they
    stream in (raise in verify mode, warn otherwise).  Returns a SolveTrace;
    on inner-solver failure the partial trace is attached to the exception.
    """
    if subsolver.metric_kind != metric.kind:
        raise ValueError(
            f"subsolver expects metric kind {subsolver.metric_kind!r}, "
            f"got {metric.kind!r}"
        )
    x = np.asarray(init, dtype=float).copy()
    trace = SolveTrace(seed=seed, iterates=[x.copy()] if keep_iterates else None)
    t0 = time.perf_counter()
    L_h = subsolver.lipschitz_h
    F_cur = eval_F(inst, x)
    streak = 0
    inner_total = 0
    last = None  # (cert, gamma) of the most recent accepted step
    k = 0
    while True:
        if k >= term.max_outer:
            trace.status = "iteration_cap"
            break
        if term.max_total_inner is not None and inner_total >= term.max_total_inner:
            trace.status = "inner_cap"
            break

        c, y = eval_ck(inst, x)
        if c == 0.0:
            # the numerator vanished: x is already globally optimal
            trace.status = "converged"
            trace.global_opt = True
            break
        eps_k = schedule.at(k)
        gamma_k = metric.gamma_at(k)
        state = IterateState(
            x=x, f_val=c * np.linalg.norm(x), g_val=float(np.linalg.norm(x)),
            c=c, y=y, gamma=gamma_k, k=k,
        )
        try:
            step_res = subsolver.solve(inst, state, eps_k)
        except InnerSolverFailure as exc:
            exc.partial_trace = trace
            trace.status = "inner_cap"
            raise
        x_next = step_res.x_next
        cert = step_res.cert
        g_next = float(np.linalg.norm(x_next))
        F_next = eval_F(inst, x_next)
        dx = x_next - x
        step_norm = float(np.linalg.norm(dx))

        _invariant(
            g_next > 0 and math.isfinite(F_next),
            f"iterate left the feasible ratio domain at k={k}",
            verify_invariants,
        )
        _invariant(
            check_error_criterion(cert, eps_k, g_next),
            f"certificate failed recheck at k={k}",
            verify_invariants,
        )
        _invariant(
            descent_check(
                F_cur, F_next, dx, gamma_k, inst.A, metric, g_next, eps_k, L_h
            ),
            f"approximate descent inequality failed at k={k}",
            verify_invariants,
        )

        trace.rows.append(
            TraceRow(
                k=k,
                F=F_cur,
                c=c,
                eps=eps_k,
                gamma=gamma_k,
                step_norm=step_norm,
                inner_iters=step_res.inner_iters,
                cert_lhs=cert.lhs,
                cert_rhs=cert.rhs,
                feas_viol=feasibility_violation(inst, x_next),
                time_s=time.perf_counter() - t0,
                g_next=g_next,
                delta_err=cert.delta_err,
            )
        )
        if keep_iterates:
            trace.iterates.append(x_next.copy())
        inner_total += step_res.inner_iters
        last = (cert, gamma_k)

        rel_step = step_norm / (1.0 + g_next)
        rel_f = abs(F_next - F_cur) / (1.0 + abs(F_next))
        x, F_cur = x_next, F_next
        k += 1

        if max(rel_step, rel_f) < term.rel_tol:
            streak += 1
        else:
            streak = 0
        if streak >= term.consecutive or rel_f < term.f_tol_fast:
            trace.status = "converged"
            break

    trace.final_x = x
    trace.final_F = F_cur
    if last is not None:
        cert, gamma_k = last
        trace.final_residual = criticality_residual(
            inst, cert.delta_vec, cert.delta_err, cert.step, gamma_k, metric
        )
    elif trace.global_opt:
        trace.final_residual = 0.0
    return trace
