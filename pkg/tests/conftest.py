import numpy as np
import pytest

from ratioprox import datagen
from ratioprox.problem import BallConstrained, BoxLasso, ProblemInstance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_box_instance(lam=0.5, b=(2.0, 0.0), bound=5.0):
    """The 2-D sanity instance: A = I2, soft-threshold analysis is by hand."""
    n = 2
    return ProblemInstance(
        A=np.eye(n),
        b=np.array(b, dtype=float),
        variant=BoxLasso(lam=lam, lower=-bound * np.ones(n), upper=bound * np.ones(n)),
    )


def tiny_ball_instance(b=(1.0, 0.0), sigma=0.5):
    return ProblemInstance(
        A=np.eye(2), b=np.array(b, dtype=float), variant=BallConstrained(sigma=sigma)
    )


def box_instance(m, n, s, seed, lam=0.1):
    inst, x_orig = datagen.gen_instance(m, n, s, seed, variant="box_lasso", lam=lam)
    return inst, x_orig


def ball_instance(m, n, s, seed, nf=1.2):
    inst, x_orig = datagen.gen_instance(
        m, n, s, seed, variant="ball_constrained", nf=nf
    )
    return inst, x_orig


def boundary_scan_min(A, b, sigma, q, passes=14, pts=4097):
    """Exact-ish min of ||u||_1 - <q, u> over {||Au - b|| <= sigma} in 2-D.

    The objective is linear on each orthant, so the minimum sits on the
    ellipse boundary (or at the origin when feasible); the boundary is a
    smooth curve scanned and refined in the angle parameter.
    """
    Ainv = np.linalg.inv(A)

    def phi_theta(thetas):
        d = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        us = (b + sigma * d) @ Ainv.T
        return np.abs(us).sum(axis=1) - us @ q

    lo, hi = 0.0, 2.0 * np.pi
    thetas = np.linspace(lo, hi, pts)
    vals = phi_theta(thetas)
    best = np.inf
    # refine around the few best grid points (the scan is multimodal)
    order = np.argsort(vals)[:6]
    width = (hi - lo) / (pts - 1)
    for i in order:
        left, right = thetas[i] - width, thetas[i] + width
        for _ in range(passes):
            grid = np.linspace(left, right, 65)
            gv = phi_theta(grid)
            j = int(np.argmin(gv))
            w = (right - left) / 64
            left, right = grid[j] - w, grid[j] + w
            best = min(best, float(gv[j]))
    if np.linalg.norm(b) <= sigma:  # origin feasible
        best = min(best, 0.0)
    return best
