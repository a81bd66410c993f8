"""Dual semi-smooth Newton solver for the box-lasso subproblem.

At outer iterate x_k with ratio c_k, subgradient y_k and metric scale
gamma_k, the subproblem is

    min_x  r(x) + 0.5*||Ax-b||^2 - <c_k y_k, x - x_k> + (gamma_k/2)||x - x_k||^2,

with r = lam*||.||_1 + box indicator.  Dualizing the Ax = y split gives a
strongly convex smooth dual in z in R^m,

    Psi(z) = 0.5*||z||^2 + <z, b> - lam*||p||_1 - (gamma_k/2)*||p - v||^2
             + (gamma_k/2)*||v||^2 - (gamma_k/2)*||x_k||^2,

where v = v_k(z) = x_k + (c_k y_k - A^T z)/gamma_k and p = prox of
r/gamma_k at v.  Newton directions use the selection
H = I + A diag(d) A^T / gamma_k from the Clarke Jacobian of the prox.

Each dual iterate yields a primal candidate w = p and gradient e = grad
Psi(z); the pair certifies the outer error criterion with
Delta = -A^T e and delta = 0 once

    ||A^T e||^2 + |<A^T e, w - x_k>|  <=  eps_k * ||w||.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InnerSolverFailure
from .newton import (
    FactorCache,
    GramBuilder,
    SsnConfig,
    armijo_search,
    newton_residual_tol,
    solve_pcg,
)
from .prox_ops import clarke_diag_l1_box, prox_l1_box
from .solver import ErrorCertificate, Reject, SubStep


@dataclass
class LassoSubCtx:
    A: np.ndarray
    b: np.ndarray
    lam: float
    lower: np.ndarray
    upper: np.ndarray
    x_k: np.ndarray
    c_k: float
    y_k: np.ndarray
    gamma_k: float

    @classmethod
    def from_state(cls, inst, state):
        v = inst.variant
        return cls(
            A=inst.A, b=inst.b, lam=v.lam, lower=v.lower, upper=v.upper,
            x_k=state.x, c_k=state.c, y_k=state.y, gamma_k=state.gamma,
        )

    @property
    def prox_t(self):
        return self.lam / self.gamma_k

    def v_shift(self):
        """Constant part of v_k(z) = v_shift - A^T z / gamma_k."""
        return self.x_k + (self.c_k / self.gamma_k) * self.y_k

    def v_of(self, z):
        return self.v_shift() - (self.A.T @ z) / self.gamma_k


def _psi_terms(ctx, v, z):
    p = prox_l1_box(v, ctx.prox_t, ctx.lower, ctx.upper)
    g = ctx.gamma_k
    val = (
        0.5 * float(z @ z)
        + float(z @ ctx.b)
        - ctx.lam * float(np.abs(p).sum())
        - 0.5 * g * float((p - v) @ (p - v))
        + 0.5 * g * float(v @ v)
        - 0.5 * g * float(ctx.x_k @ ctx.x_k)
    )
    return p, val


def psi_lasso(z, ctx):
    """Dual objective value at z."""
    _, val = _psi_terms(ctx, ctx.v_of(z), z)
    return val


def psi_lasso_grad(z, ctx):
    """Dual gradient: -A prox(v_k(z)) + z + b."""
    p = prox_l1_box(ctx.v_of(z), ctx.prox_t, ctx.lower, ctx.upper)
    return -ctx.A @ p + z + ctx.b


def certificate_lasso(w, e, ctx, eps_k):
    """Certificate attempt from a dual iterate's primal pair (w, e).

    Delta = -A^T e lands in the inexact optimality inclusion by the prox
    definition, with no subgradient slack (delta = 0)."""
    At_e = ctx.A.T @ e
    step = w - ctx.x_k
    lhs = float(At_e @ At_e) + abs(float(At_e @ step))
    w_norm = float(np.linalg.norm(w))
    rhs = eps_k * w_norm
    if w_norm > 0.0 and lhs <= rhs:
        return ErrorCertificate(
            delta_vec=-At_e, delta_err=0.0, step=step, lhs=lhs, rhs=rhs
        )
    return Reject(lhs=lhs, rhs=rhs)


@dataclass
class SsnResult:
    w: np.ndarray
    e: np.ndarray
    z: np.ndarray
    iters: int


def ssn_solve_lasso(ctx, z0, cfg, accept, gram=None):
    """Newton iterations on grad Psi(z) = 0 until ``accept(w, e)`` passes.

    The acceptance predicate is probed at every dual iterate, z0 included,
    so a pre-solved root returns with zero Newton steps.  Raises
    InnerSolverFailure when the iteration/gradient budget is exhausted
    first.
    """
    A, g = ctx.A, ctx.gamma_k
    m = A.shape[0]
    if gram is None and m <= cfg.direct_limit:
        gram = GramBuilder(A)
    factors = FactorCache()
    shift = ctx.v_shift()
    z = np.asarray(z0, dtype=float).copy()
    At_z = A.T @ z
    v = shift - At_z / g
    w, psi = _psi_terms(ctx, v, z)
    e = -A @ w + z + ctx.b
    iters = 0
    while True:
        if accept(w, e):
            return SsnResult(w=w, e=e, z=z, iters=iters)
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

        sel = clarke_diag_l1_box(v, ctx.prox_t, ctx.lower, ctx.upper)
        if m <= cfg.direct_limit:
            M = gram.lower(sel)

            def assemble():
                H = M / g
                H[np.diag_indices(m)] += 1.0
                return H

            d = factors.solve((gram.version, g), -e, assemble)
        else:
            Ad = A[:, sel]
            diag = 1.0 + (Ad * Ad).sum(axis=1) / g
            d = solve_pcg(
                lambda p: p + Ad @ (Ad.T @ p) / g,
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
            _, val = _psi_terms(ctx, v - step * At_d / g, z + step * d)
            return val

        step, psi = armijo_search(psi_at, psi, slope, cfg)
        z = z + step * d
        At_z = At_z + step * At_d
        v = shift - At_z / g
        w, psi = _psi_terms(ctx, v, z)
        e = -A @ w + z + ctx.b
        iters += 1


@dataclass
class LassoDualSsn:
    """Subsolver adapter for the outer loop (identity metric, h = 0 split).

    Keeps the previous outer iteration's dual solution for warm starting;
    one adapter instance per run.
    """

    cfg: SsnConfig = field(default_factory=SsnConfig)
    warm_start: bool = True
    lipschitz_h: float = 0.0
    metric_kind: str = "identity"
    _z_warm: np.ndarray | None = field(default=None, init=False, repr=False)
    _gram: GramBuilder | None = field(default=None, init=False, repr=False)

    def solve(self, inst, state, eps_k):
        ctx = LassoSubCtx.from_state(inst, state)
        if self._gram is not None and self._gram.A is not inst.A:
            self._gram = None  # adapter was moved onto a different instance
            self._z_warm = None
        if self._gram is None and inst.m <= self.cfg.direct_limit:
            self._gram = GramBuilder(inst.A)
        if self.warm_start and self._z_warm is not None:
            z0 = self._z_warm
        else:
            z0 = np.zeros(inst.m)
        accepted = []

        def accept(w, e):
            res = certificate_lasso(w, e, ctx, eps_k)
            if isinstance(res, ErrorCertificate):
                accepted.append(res)
                return True
            return False

        res = ssn_solve_lasso(ctx, z0, self.cfg, accept, gram=self._gram)
        self._z_warm = res.z
        return SubStep(x_next=res.w, cert=accepted[-1], inner_iters=res.iters)
