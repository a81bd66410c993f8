"""Self-check helpers used by the verify subcommand and the test suite."""

import numpy as np

from .problem import BallConstrained, BoxLasso, ProblemInstance, eval_ck
from .ssn_ball import BallSubCtx, min_norm_feasible, psi_con, psi_con_grad
from .ssn_lasso import LassoSubCtx, psi_lasso, psi_lasso_grad


def central_fd(fun, z, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (fun(zp) - fun(zm)) / (2.0 * h)
    return g


def random_lasso_ctx(seed, m=12, n=30):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n) * 0.5
    b = A @ x + 0.05 * rng.standard_normal(m)
    inst = ProblemInstance(
        A=A, b=b,
        variant=BoxLasso(lam=0.3, lower=-4 * np.ones(n), upper=4 * np.ones(n)),
    )
    c, y = eval_ck(inst, x)
    return LassoSubCtx(
        A=A, b=b, lam=0.3, lower=inst.variant.lower, upper=inst.variant.upper,
        x_k=x, c_k=c, y_k=y, gamma_k=0.7,
    )


def random_ball_ctx(seed, m=12, n=30):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_true = np.zeros(n)
    x_true[rng.choice(n, 4, replace=False)] = rng.standard_normal(4)
    b = A @ x_true + 0.02 * rng.standard_normal(m)
    sigma = 0.5 * float(np.linalg.norm(b))
    inst = ProblemInstance(A=A, b=b, variant=BallConstrained(sigma=sigma))
    x_feas = min_norm_feasible(A, b)
    x = 0.5 * x_true + 0.5 * x_feas
    if np.linalg.norm(A @ x - b) >= sigma:
        x = x_feas
    c, y = eval_ck(inst, x)
    return BallSubCtx(
        A=A, b=b, sigma=sigma, x_feas=x_feas, x_k=x, c_k=c, y_k=y, gamma_k=0.6,
    )


def fd_check_lasso(seed=0, points=20, h=1e-6):
    """Worst relative FD error of the lasso dual gradient at random points."""
    ctx = random_lasso_ctx(seed)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(points):
        z = rng.standard_normal(ctx.A.shape[0])
        g = psi_lasso_grad(z, ctx)
        fd = central_fd(lambda zz: psi_lasso(zz, ctx), z, h=h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
    return worst


def fd_check_ball(seed=0, points=20, h=1e-6):
    """Worst relative FD error of the ball dual gradient at random points."""
    ctx = random_ball_ctx(seed)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(points):
        z = rng.standard_normal(ctx.A.shape[0])
        g = psi_con_grad(z, ctx)
        fd = central_fd(lambda zz: psi_con(zz, ctx), z, h=h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
    return worst


class FaultySubsolver:
    """Wraps a subsolver and corrupts the certificate witness after the
    fact (stale lhs), so the outer recheck must flag it."""

    def __init__(self, inner):
        self.inner = inner
        self.lipschitz_h = inner.lipschitz_h
        self.metric_kind = inner.metric_kind

    def solve(self, inst, state, eps_k):
        step = self.inner.solve(inst, state, eps_k)
        step.cert.delta_vec = step.cert.delta_vec + 10.0 * (
            1.0 + np.abs(step.cert.delta_vec)
        )
        return step
