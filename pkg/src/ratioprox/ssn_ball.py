"""Regularized dual semi-smooth Newton solver for the ball-constrained
subproblem, with retraction to feasibility.

At outer iterate x_k the subproblem under the metric gamma_k*(I + A^T A) is

    min_x ||x||_1 + i_sigma(Ax-b) - <c_k y_k, x-x_k>
          + (gamma_k/2)||x-x_k||^2 + (gamma_k/2)||A(x-x_k)||^2.

With s = x_k + c_k y_k / gamma_k and bk = A x_k - b, splitting Ax - y = b
gives a smooth convex dual

    Psi(z) = <z,b> + (g/2)||u1||^2 - ||p||_1 - (g/2)||p-u1||^2
             + (g/2)||u2||^2 - (g/2)||P-u2||^2 - (g/2)||s||^2 - (g/2)||bk||^2,

where u1 = s - A^T z / g, u2 = bk + z/g, p = soft(u1, 1/g), and P is the
ball projection of u2.  The generalized Hessian
(A diag(d) A^T + J_ball)/g may be singular, so Newton systems carry an
adaptive ridge nu = tau1*min(tau2, ||grad||).

The primal candidate w = p can violate the ball slightly; it is retracted
along the segment toward a strictly feasible anchor x_feas, and the
retracted point w~ certifies the outer criterion with

    Delta  = g*(-A^T e + (I + A^T A)(w~-w)),
    delta1 = ||w~||_1 - ||w||_1 - <d1, w~-w>          (>= 0 by convexity),
    delta2 = |<e - A(w~-w), d2>|,

where d1 = g*(u1 - w) and d2 = g*(u2 - P) are the prox/projection residual
multipliers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InnerSolverFailure, InvariantViolation
from .newton import (
    GramBuilder,
    SsnConfig,
    armijo_search,
    newton_residual_tol,
    solve_direct_spd,
    solve_pcg,
)
from .prox_ops import clarke_diag_l1, clarke_jacobian_ball, project_ball, prox_l1
from .solver import ErrorCertificate, Reject, SubStep


def min_norm_feasible(A, b):
    """Minimum-norm interpolant A^T (A A^T)^{-1} b; assumes full row rank.

    Satisfies ||A x - b|| = 0, hence strictly inside any sigma > 0 ball.
    """
    from scipy.linalg import cho_factor, cho_solve

    c = cho_factor(A @ A.T)
    return A.T @ cho_solve(c, b)


@dataclass
class BallSubCtx:
    A: np.ndarray
    b: np.ndarray
    sigma: float
    x_feas: np.ndarray
    x_k: np.ndarray
    c_k: float
    y_k: np.ndarray
    gamma_k: float
    r_feas: float = field(init=False)
    s: np.ndarray = field(init=False)
    b_k: np.ndarray = field(init=False)

    def __post_init__(self):
        self.r_feas = float(np.linalg.norm(self.A @ self.x_feas - self.b))
        if not self.r_feas < self.sigma:
            raise InvariantViolation("x_feas must satisfy ||A x_feas - b|| < sigma")
        self.s = self.x_k + (self.c_k / self.gamma_k) * self.y_k
        self.b_k = self.A @ self.x_k - self.b

    @classmethod
    def from_state(cls, inst, state, x_feas):
        return cls(
            A=inst.A, b=inst.b, sigma=inst.variant.sigma, x_feas=x_feas,
            x_k=state.x, c_k=state.c, y_k=state.y, gamma_k=state.gamma,
        )

    @property
    def prox_t(self):
        return 1.0 / self.gamma_k

    def u1_of(self, z):
        return self.s - (self.A.T @ z) / self.gamma_k

    def u2_of(self, z):
        return self.b_k + z / self.gamma_k


def _psi_terms(ctx, u1, u2, z):
    g = ctx.gamma_k
    p = prox_l1(u1, ctx.prox_t)
    proj = project_ball(u2, ctx.sigma)
    val = (
        float(z @ ctx.b)
        + 0.5 * g * float(u1 @ u1)
        - float(np.abs(p).sum())
        - 0.5 * g * float((p - u1) @ (p - u1))
        + 0.5 * g * float(u2 @ u2)
        - 0.5 * g * float((proj - u2) @ (proj - u2))
        - 0.5 * g * float(ctx.s @ ctx.s)
        - 0.5 * g * float(ctx.b_k @ ctx.b_k)
    )
    return p, proj, val


def psi_con(z, ctx):
    """Dual objective value at z."""
    _, _, val = _psi_terms(ctx, ctx.u1_of(z), ctx.u2_of(z), z)
    return val


def psi_con_grad(z, ctx):
    """Dual gradient: -A prox(u1) + proj_ball(u2) + b."""
    p = prox_l1(ctx.u1_of(z), ctx.prox_t)
    proj = project_ball(ctx.u2_of(z), ctx.sigma)
    return -ctx.A @ p + proj + ctx.b


def retract(w, ctx):
    """Pull w toward the strictly feasible anchor until the ball holds.

    Returns (w~, rho) with rho = 1 when w is already feasible, else the
    convex weight (sigma - r_feas)/(r_w - r_feas); the norm is convex along
    the segment, so ||A w~ - b|| <= sigma.
    """
    r_w = float(np.linalg.norm(ctx.A @ w - ctx.b))
    return _retract_with_residual(w, r_w, ctx)


def _retract_with_residual(w, r_w, ctx):
    if r_w <= ctx.sigma:
        return w, 1.0
    rho = (ctx.sigma - ctx.r_feas) / (r_w - ctx.r_feas)
    return rho * w + (1.0 - rho) * ctx.x_feas, rho


def certificate_ball(w_tilde, w, e, z, ctx, eps_k):
    """Certificate attempt for the retracted candidate w~.

    delta1 must be nonnegative (d1 is a subgradient of ||.||_1 at w);
    a materially negative value indicates a bug upstream."""
    g = ctx.gamma_k
    A = ctx.A
    dwt = w_tilde - w
    u1 = ctx.u1_of(z)
    u2 = ctx.u2_of(z)
    d1 = g * (u1 - w)
    d2 = g * (u2 - project_ball(u2, ctx.sigma))
    A_dwt = A @ dwt
    delta = g * (-(A.T @ e) + dwt + A.T @ A_dwt)
    delta1 = float(np.abs(w_tilde).sum() - np.abs(w).sum() - d1 @ dwt)
    if delta1 < -1e-12:
        raise InvariantViolation(f"delta1 = {delta1:.3e} < 0 in ball certificate")
    delta1 = max(delta1, 0.0)
    delta2 = abs(float((e - A_dwt) @ d2))
    delta_err = delta1 + delta2
    step = w_tilde - ctx.x_k
    # summed exactly as the runtime recheck recomputes it
    lhs = float(delta @ delta) + abs(float(delta @ step)) + delta_err
    wt_norm = float(np.linalg.norm(w_tilde))
    rhs = eps_k * wt_norm
    if wt_norm > 0.0 and lhs <= rhs:
        return ErrorCertificate(
            delta_vec=delta, delta_err=delta_err, step=step, lhs=lhs, rhs=rhs
        )
    return Reject(lhs=lhs, rhs=rhs)


@dataclass
class BallSsnResult:
    w_tilde: np.ndarray
    w: np.ndarray
    e: np.ndarray
    z: np.ndarray
    rho: float
    iters: int


def ssn_solve_ball(ctx, z0, cfg, accept, gram=None):
    """Regularized Newton iterations until ``accept(w~, w, e, z)`` passes.

    The acceptance predicate (which wraps the certificate) is probed at
    every dual iterate including z0."""
    A, g = ctx.A, ctx.gamma_k
    m = A.shape[0]
    if gram is None and m <= cfg.direct_limit:
        gram = GramBuilder(A)
    z = np.asarray(z0, dtype=float).copy()
    u1 = ctx.u1_of(z)
    u2 = ctx.u2_of(z)
    w, proj, psi = _psi_terms(ctx, u1, u2, z)
    e = -A @ w + proj + ctx.b
    iters = 0
    while True:
        # A w = proj + b - e, so the ball residual of w costs no product
        r_w = float(np.linalg.norm(proj - e))
        w_tilde, rho = _retract_with_residual(w, r_w, ctx)
        if accept(w_tilde, w, e, z):
            return BallSsnResult(
                w_tilde=w_tilde, w=w, e=e, z=z, rho=rho, iters=iters
            )
        gn = float(np.linalg.norm(e))
        if gn <= cfg.grad_floor:
            raise InnerSolverFailure(
                "dual gradient hit the floor before the certificate passed "
                f"(||grad||={gn:.3e})"
            )
        if iters >= cfg.max_iters:
            raise InnerSolverFailure(
                f"Newton budget exhausted after {iters} iterations"
            )

        sel = clarke_diag_l1(u1, ctx.prox_t)
        jac = clarke_jacobian_ball(u2, ctx.sigma)
        nu = cfg.reg_scale * min(cfg.reg_cap, gn)
        if m <= cfg.direct_limit:
            H = gram.lower(sel) / g
            jac.add_to(H, coeff=1.0 / g)
            H[np.diag_indices(m)] += nu
            d = solve_direct_spd(H, -e)
        else:
            Ad = A[:, sel]
            diag = (Ad * Ad).sum(axis=1) / g + jac.diagonal(m) / g + nu
            d = solve_pcg(
                lambda p: Ad @ (Ad.T @ p) / g + jac.apply(p) / g + nu * p,
                diag,
                -e,
                newton_residual_tol(cfg, gn),
            )
        slope = float(e @ d)
        if slope >= 0.0:
            d = -e
            slope = -gn * gn

        At_d = A.T @ d

        def psi_at(step):
            _, _, val = _psi_terms(
                ctx, u1 - step * At_d / g, u2 + step * d / g, z + step * d
            )
            return val

        step, psi = armijo_search(psi_at, psi, slope, cfg)
        z = z + step * d
        u1 = u1 - step * At_d / g
        u2 = u2 + step * d / g
        w, proj, psi = _psi_terms(ctx, u1, u2, z)
        e = -A @ w + proj + ctx.b
        iters += 1


@dataclass
class BallDualSsn:
    """Subsolver adapter for the outer loop (gram metric, h = 0 split)."""

    cfg: SsnConfig = field(default_factory=SsnConfig)
    warm_start: bool = True
    lipschitz_h: float = 0.0
    metric_kind: str = "gram"
    _z_warm: np.ndarray | None = field(default=None, init=False, repr=False)
    _x_feas: np.ndarray | None = field(default=None, init=False, repr=False)
    _gram: GramBuilder | None = field(default=None, init=False, repr=False)

    def feasible_anchor(self, inst):
        if self._x_feas is None:
            self._x_feas = (
                inst.x_feas if inst.x_feas is not None
                else min_norm_feasible(inst.A, inst.b)
            )
        return self._x_feas

    def solve(self, inst, state, eps_k):
        if self._gram is not None and self._gram.A is not inst.A:
            self._gram = None  # adapter was moved onto a different instance
            self._z_warm = None
            self._x_feas = None
        ctx = BallSubCtx.from_state(inst, state, self.feasible_anchor(inst))
        if self._gram is None and inst.m <= self.cfg.direct_limit:
            self._gram = GramBuilder(inst.A)
        if self.warm_start and self._z_warm is not None:
            z0 = self._z_warm
        else:
            z0 = np.zeros(inst.m)
        accepted = []

        def accept(w_tilde, w, e, z):
            res = certificate_ball(w_tilde, w, e, z, ctx, eps_k)
            if isinstance(res, ErrorCertificate):
                accepted.append(res)
                return True
            return False

        res = ssn_solve_ball(ctx, z0, self.cfg, accept, gram=self._gram)
        self._z_warm = res.z
        return SubStep(x_next=res.w_tilde, cert=accepted[-1], inner_iters=res.iters)
