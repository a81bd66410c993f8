"""Shared machinery for the two dual semi-smooth Newton solvers: the config
knobs, the direct/iterative linear-system dispatch, and Armijo backtracking.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas as _blas
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from .errors import LineSearchStall


@dataclass
class SsnConfig:
    """Newton solver knobs.

    mu, delta: Armijo slope fraction and backtracking ratio.
    eta_bar, tau: the linear system is solved to residual
        min(eta_bar, ||grad||^(1+tau)) on the iterative path.
    reg_scale, reg_cap: adaptive ridge nu = reg_scale * min(reg_cap, ||grad||)
        for the ball solver, whose Jacobian can be singular.
    grad_floor: bailout when ||grad|| underflows before the certificate
        passes (only possible when the primal candidate degenerates to 0).
    direct_limit: Cholesky for systems up to this size, preconditioned CG
        above it.
    """

    mu: float = 1e-4
    delta: float = 0.5
    eta_bar: float = 1e-3
    tau: float = 0.2
    reg_scale: float = 0.99
    reg_cap: float = 1e-6
    max_iters: int = 200
    max_linesearch: int = 60
    grad_floor: float = 1e-12
    direct_limit: int = 2000

    def __post_init__(self):
        if not 0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.eta_bar < 1:
            raise ValueError("eta_bar must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")


def newton_residual_tol(cfg, grad_norm):
    return min(cfg.eta_bar, grad_norm ** (1.0 + cfg.tau))


class GramBuilder:
    """Maintains M = A[:, sel] A[:, sel]^T across Newton iterations.

    Consecutive Clarke selections differ in few columns, so M is rank-updated
    with syrk instead of rebuilt; a periodic fresh rebuild caps rounding
    drift.  Only the lower triangle of the returned matrix is valid, which is
    all the Cholesky path reads.  The returned array is reused: callers must
    not modify it.
    """

    REFRESH_EVERY = 64

    def __init__(self, A):
        self.A = A
        self._sel = None
        self._M = None
        self._updates = 0
        self.version = 0  # bumps whenever M changes; lets callers cache factors

    def _fresh(self, sel):
        Ad = self.A[:, sel]
        M = Ad @ Ad.T
        self._sel = sel.copy()
        self._updates = 0
        # syrk updates below require Fortran order; done lazily on first use
        self._M = M
        self.version += 1
        return M

    def lower(self, sel):
        if self._sel is None:
            return self._fresh(sel)
        added = sel & ~self._sel
        removed = self._sel & ~sel
        na, nr = int(added.sum()), int(removed.sum())
        if na + nr == 0:
            return self._M
        nnz = int(sel.sum())
        if self._updates >= self.REFRESH_EVERY or na + nr >= max(nnz // 3, 8):
            return self._fresh(sel)
        M = self._M
        if na:
            M = _blas.dsyrk(
                1.0, self.A[:, added].T, beta=1.0, c=M, trans=1, lower=1,
                overwrite_c=1,
            )
        if nr:
            M = _blas.dsyrk(
                -1.0, self.A[:, removed].T, beta=1.0, c=M, trans=1, lower=1,
                overwrite_c=1,
            )
        self._M = M
        self._sel = sel.copy()
        self._updates += 1
        self.version += 1
        return M


def solve_direct_spd(H, rhs):
    """Dense Cholesky solve; H is overwritten by its factor."""
    c, low = cho_factor(H, lower=True, overwrite_a=True, check_finite=False)
    return cho_solve((c, low), rhs, check_finite=False)


class FactorCache:
    """One-slot Cholesky factor cache keyed on (gram version, gamma).

    Within one subproblem gamma is fixed, so the factor can be reused
    whenever the Clarke selection (hence the gram matrix) did not change
    between Newton iterations.
    """

    def __init__(self):
        self._key = None
        self._factor = None

    def solve(self, key, rhs, assemble):
        if key != self._key:
            self._factor = cho_factor(
                assemble(), lower=True, overwrite_a=True, check_finite=False
            )
            self._key = key
        return cho_solve(self._factor, rhs, check_finite=False)


def solve_pcg(matvec, diag, rhs, tol):
    """Jacobi-preconditioned CG to absolute residual ``tol``.

    A direction from a CG run that hit its iteration cap is still usable:
    the caller's slope guard and line search handle inexact directions.
    """
    m = rhs.shape[0]
    op = LinearOperator((m, m), matvec=matvec, dtype=float)
    inv_diag = 1.0 / diag
    precond = LinearOperator((m, m), matvec=lambda r: inv_diag * r, dtype=float)
    sol, _ = cg(op, rhs, rtol=0.0, atol=tol, M=precond)
    return sol


def armijo_search(psi_at, psi0, slope, cfg):
    """Largest step delta^i satisfying the Armijo condition.

    ``psi_at(step)`` evaluates the dual objective along the Newton direction.
    ``slope`` must be negative.  Returns (step, psi_value).

    Near the dual minimum the demanded decrease mu*step*slope falls below
    the floating-point resolution of the objective; steps are then accepted
    whenever they do not increase the value beyond that noise floor, which
    keeps the endgame from stalling on unresolvable comparisons.
    """
    noise = 16.0 * np.finfo(float).eps * (abs(psi0) + 1.0)
    step = 1.0
    for _ in range(cfg.max_linesearch + 1):
        val = psi_at(step)
        demanded = cfg.mu * step * slope
        if val <= psi0 + demanded:
            return step, val
        if -demanded <= noise and val <= psi0 + noise:
            return step, val
        step *= cfg.delta
    raise LineSearchStall(
        f"Armijo backtracking exceeded {cfg.max_linesearch} halvings"
    )
