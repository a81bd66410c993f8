"""Closed-form proximal/projection operators and their Clarke Jacobian
selections.

These are the building blocks of both dual Newton solvers: soft-thresholding
(plain and box-clipped), the Euclidean-ball projection, and binary diagonal /
rank-structured selections from the Clarke generalized Jacobians of those
maps.  Tie-breaking at the nonsmooth boundaries always picks the selection
with the smaller range (d_i = 0, t = 0): it is a valid Clarke element and
keeps the Newton matrix better conditioned.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadBounds

# |u| within this of the ball radius counts as "on the boundary"
_BOUNDARY_TOL = 1e-12


def prox_l1(u, t):
    """Soft-thresholding: componentwise sign(u) * max(|u| - t, 0)."""
    return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)


def prox_l1_box(u, t, lower, upper):
    """Proximal map of t*||.||_1 + indicator of the box [lower, upper].

    Componentwise min(max(soft(u, t), lower), upper).  Requires
    lower <= upper; the bounds need not contain 0.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise BadBounds("prox_l1_box: lower > upper in some coordinate")
    return np.minimum(np.maximum(prox_l1(u, t), lower), upper)


def project_ball(u, sigma):
    """Projection onto the Euclidean ball of radius sigma > 0."""
    nu = np.linalg.norm(u)
    if nu <= sigma:
        return np.asarray(u, dtype=float).copy()
    return (sigma / nu) * u


def clarke_diag_l1(u, t):
    """Binary diagonal selection from the Clarke Jacobian of prox_l1.

    d_i = 1 iff |u_i| > t; ties |u_i| = t break to 0.  Returned as a
    boolean mask (True = 1).
    """
    return np.abs(u) > t


def clarke_diag_l1_box(u, t, lower, upper):
    """Binary diagonal selection from the Clarke Jacobian of prox_l1_box.

    d_i = 1 iff |u_i| > t and the thresholded value lands strictly inside
    (lower_i, upper_i); every boundary tie breaks to 0.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise BadBounds("clarke_diag_l1_box: lower > upper in some coordinate")
    soft = prox_l1(u, t)
    return (np.abs(u) > t) & (soft > lower) & (soft < upper)


@dataclass(frozen=True)
class BallJacobian:
    """One Clarke Jacobian element of the ball projection at u.

    case "identity":  J = I                      (||u|| < sigma, and the
                                                  t = 0 boundary selection)
    case "exterior":  J = (sigma/||u||) (I - u u^T / ||u||^2)

    ``apply`` never materializes the m-by-m matrix; ``add_to`` accumulates
    coeff * J into an already-dense Newton matrix.
    """

    case: str
    sigma: float
    u: np.ndarray | None = None
    u_norm: float = 0.0

    def apply(self, v):
        if self.case == "identity":
            return np.asarray(v, dtype=float).copy()
        scale = self.sigma / self.u_norm
        return scale * (v - (self.u @ v) / self.u_norm**2 * self.u)

    def add_to(self, H, coeff=1.0):
        """In-place H += coeff * J for the direct (Cholesky) solver path."""
        m = H.shape[0]
        if self.case == "identity":
            H[np.diag_indices(m)] += coeff
            return H
        scale = coeff * self.sigma / self.u_norm
        H[np.diag_indices(m)] += scale
        H -= (scale / self.u_norm**2) * np.outer(self.u, self.u)
        return H

    def diagonal(self, m):
        """diag(J), used to precondition the iterative solver path."""
        if self.case == "identity":
            return np.ones(m)
        scale = self.sigma / self.u_norm
        return scale * (1.0 - self.u**2 / self.u_norm**2)


def clarke_jacobian_ball(u, sigma):
    """Clarke Jacobian selection of the ball projection at u.

    Interior (and the measure-zero boundary, selected with t = 0) give the
    identity; strictly outside gives the scaled tangential projector.
    """
    u = np.asarray(u, dtype=float)
    nu = np.linalg.norm(u)
    if nu <= sigma + _BOUNDARY_TOL:
        return BallJacobian(case="identity", sigma=sigma)
    return BallJacobian(case="exterior", sigma=sigma, u=u.copy(), u_norm=nu)
