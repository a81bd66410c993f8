"""Initialization routines and an exact-step baseline for cross-validation.

The box-lasso ratio problem admits a second (f, h) split that puts the
quadratic in h; the metric-proximal subproblem then has the closed-form
solution

    x+ = prox_{r/gamma}( x - (A^T(Ax-b) - c*y)/gamma ),

which is both the plain proximal gradient-subgradient baseline step and the
exact-mode subsolver of the outer loop (the two trajectories coincide by
construction).
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ZeroIterate
from .problem import eval_ck, eval_F, feasibility_violation
from .prox_ops import prox_l1, prox_l1_box
from .solver import (
    ErrorCertificate,
    SolveTrace,
    SubStep,
    TerminationRule,
    TraceRow,
)


def lipschitz_ata(A, iters=30, inflate=1.01):
    """Power-iteration estimate of lambda_max(A^T A), then inflated.

    Deterministic start vector; the inflation keeps gamma > L_h safe against
    the estimate's downward bias.
    """
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        u = A @ v
        v = A.T @ u
        lam = float(np.linalg.norm(v))
        if lam == 0.0:
            return 0.0
        v /= lam
    return inflate * lam


def fista_l1(A, b, lam, iters=200):
    """Monotone FISTA with backtracking on min lam*||x||_1 + 0.5*||Ax-b||^2.

    Backtracking doubles the local Lipschitz estimate until the quadratic
    majorization holds; the monotone safeguard keeps the objective
    nonincreasing while preserving the accelerated momentum.  Starts at 0
    and returns the iterate after ``iters`` iterations.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")

    def smooth(x):
        r = A @ x - b
        return 0.5 * float(r @ r), A.T @ r

    def objective(x, fx):
        return lam * float(np.abs(x).sum()) + fx

    n = A.shape[1]
    x = np.zeros(n)
    y = x.copy()
    t = 1.0
    L = 1.0  # backtracking grows this until the majorization holds
    fx, _ = smooth(x)
    obj_x = objective(x, fx)
    for _ in range(iters):
        fy, gy = smooth(y)
        while True:
            z = prox_l1(y - gy / L, lam / L)
            fz, _ = smooth(z)
            dz = z - y
            if fz <= fy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + 1e-12:
                break
            L *= 2.0
        obj_z = objective(z, fz)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if obj_z <= obj_x:
            x_next, obj_next = z, obj_z
        else:
            x_next, obj_next = x, obj_x
        y = x_next + (t / t_next) * (z - x_next) + ((t - 1.0) / t_next) * (x_next - x)
        x, obj_x, t = x_next, obj_next, t_next
    return x


@dataclass
class ExactBoxProx:
    """Exact subsolver for the split with h = 0.5*||Ax-b||^2 inside h.

    Solves the linearized subproblem in closed form, so the certificate is
    identically (0, 0) and the outer loop reduces to the exact baseline.
    """

    lipschitz_h: float
    metric_kind: str = "identity"

    @classmethod
    def for_instance(cls, inst):
        return cls(lipschitz_h=lipschitz_ata(inst.A))

    def solve(self, inst, state, eps_k):
        v = inst.variant
        grad_h = inst.A.T @ (inst.A @ state.x - inst.b)
        u = state.x - (grad_h - state.c * state.y) / state.gamma
        x_next = prox_l1_box(u, v.lam / state.gamma, v.lower, v.upper)
        if not np.any(x_next):
            raise ZeroIterate("exact proximal step collapsed to the origin")
        step = x_next - state.x
        cert = ErrorCertificate(
            delta_vec=np.zeros(inst.n),
            delta_err=0.0,
            step=step,
            lhs=0.0,
            rhs=eps_k * float(np.linalg.norm(x_next)),
        )
        return SubStep(x_next=x_next, cert=cert, inner_iters=0)


def pgs_run(inst, init, gamma=None, term: TerminationRule = TerminationRule()):
    """Plain proximal gradient-subgradient baseline on the box-lasso ratio.

    One closed-form prox step per iteration with a fixed gamma > L_h
    (power-iteration estimate by default); termination rules mirror the
    inexact outer loop.  Raises ZeroIterate if a step leaves the ratio
    domain.
    """
    if gamma is None:
        gamma = lipschitz_ata(inst.A)
    v = inst.variant
    x = np.asarray(init, dtype=float).copy()
    trace = SolveTrace(iterates=[x.copy()])
    t0 = time.perf_counter()
    F_cur = eval_F(inst, x)
    streak = 0
    k = 0
    while True:
        if k >= term.max_outer:
            trace.status = "iteration_cap"
            break
        c, y = eval_ck(inst, x)
        if c == 0.0:
            trace.status = "converged"
            trace.global_opt = True
            break
        grad_h = inst.A.T @ (inst.A @ x - inst.b)
        x_next = prox_l1_box(
            x - (grad_h - c * y) / gamma, v.lam / gamma, v.lower, v.upper
        )
        if not np.any(x_next):
            raise ZeroIterate("baseline prox step collapsed to the origin")
        F_next = eval_F(inst, x_next)
        step_norm = float(np.linalg.norm(x_next - x))
        g_next = float(np.linalg.norm(x_next))
        trace.rows.append(
            TraceRow(
                k=k,
                F=F_cur,
                c=c,
                eps=0.0,
                gamma=gamma,
                step_norm=step_norm,
                inner_iters=0,
                cert_lhs=0.0,
                cert_rhs=0.0,
                feas_viol=feasibility_violation(inst, x_next),
                time_s=time.perf_counter() - t0,
                g_next=g_next,
            )
        )
        trace.iterates.append(x_next.copy())
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
    return trace


def feasible_init_ball(inst, l1_iters=200):
    """Feasible nonzero starting point for the ball-constrained variant.

    Runs the penalized l1 solver (lam = 1e-2 * ||A^T b||_inf) and retracts
    the result toward the minimum-norm interpolant; falls back to the
    interpolant itself if the retract degenerates to 0.
    """
    from .ssn_ball import min_norm_feasible

    x_feas = inst.x_feas if inst.x_feas is not None else min_norm_feasible(
        inst.A, inst.b
    )
    lam = 1e-2 * float(np.max(np.abs(inst.A.T @ inst.b)))
    x_hat = fista_l1(inst.A, inst.b, lam, iters=l1_iters)
    sigma = inst.variant.sigma
    r_feas = float(np.linalg.norm(inst.A @ x_feas - inst.b))
    r_hat = float(np.linalg.norm(inst.A @ x_hat - inst.b))
    if r_hat <= sigma:
        x0 = x_hat
    else:
        rho = (sigma - r_feas) / (r_hat - r_feas)
        x0 = rho * x_hat + (1.0 - rho) * x_feas
    if not np.any(x0):
        # degenerate retract: fall back to the interpolant, nonzero since
        # ||b|| > sigma > 0
        return x_feas.copy()
    return x0
