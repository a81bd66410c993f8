"""Convergence-rate diagnostics.

The sequential convergence theory works through an auxiliary function whose
KL exponent theta_tau = max(theta_F, (tau-1)/tau) inherits from the
objective's exponent theta_F.  For polynomial tolerance schedules
eps_k = eps0/(k+1)^q the attainable distance-decay exponents reduce to
closed-form case splits in (q, tau, theta); this module evaluates them, maps
(theta_F, schedule) to the predicted asymptotic rate, and fits empirical
decay on recorded traces.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TooShort, UnsupportedSchedule
from .schedules import Exponential, Polynomial, polynomial_threshold

# distances below this fraction of the window maximum are proxy-dominated
# junk (the reference point is itself an iterate) and are not fitted
_REL_FLOOR = 1e-13


def kl_exponent_transfer(theta_F, tau):
    """Exponent of the auxiliary function: max(theta_F, (tau-1)/tau)."""
    if not 0.0 <= theta_F < 1.0:
        raise DomainError("theta_F must lie in [0, 1)")
    if not tau > 1.0:
        raise DomainError("tau must exceed 1")
    return max(theta_F, (tau - 1.0) / tau)


def xi(tau, q):
    """Xi(tau, q) = ((tau-1)/tau) * (q-1); exceeds 1 on the valid domain."""
    return (tau - 1.0) / tau * (q - 1.0)


def _check_poly_domain(tau, q):
    if not tau > 1.0:
        raise DomainError("tau must exceed 1")
    if not q > polynomial_threshold(tau):
        raise DomainError(
            f"q must exceed (2*tau-1)/(tau-1) = {polynomial_threshold(tau):g}"
        )


def _steep_case(tau, q):
    """True on the branch tau > 2, q >= 2(tau-1)/(tau-2) where q/2 binds."""
    return tau > 2.0 and q >= 2.0 * (tau - 1.0) / (tau - 2.0)


def psi1(tau, q):
    """min(q/2, Xi) in closed form."""
    _check_poly_domain(tau, q)
    if _steep_case(tau, q):
        return q / 2.0
    return xi(tau, q)


def psi2(theta_tau, tau, q, theta):
    """min(q/2, Xi, th/(1-th)*(q/2-1), th/(1-th)*(Xi-1)) in closed form."""
    _check_poly_domain(tau, q)
    if not 0.5 < theta_tau < 1.0:
        raise DomainError("theta_tau must lie in (1/2, 1)")
    if not theta_tau <= theta < 1.0:
        raise DomainError("theta must lie in [theta_tau, 1)")
    ratio = theta / (1.0 - theta)
    if _steep_case(tau, q):
        if theta < q / (2.0 * q - 2.0):
            return ratio * (q / 2.0 - 1.0)
        return q / 2.0
    x = xi(tau, q)
    if theta < x / (2.0 * x - 1.0):
        return ratio * (x - 1.0)
    return x


def psi3(theta_tau, tau, q, theta):
    """min(psi2, th/(2th-1)) in closed form."""
    _check_poly_domain(tau, q)
    if not 0.5 < theta_tau < 1.0:
        raise DomainError("theta_tau must lie in (1/2, 1)")
    if not theta_tau <= theta < 1.0:
        raise DomainError("theta must lie in [theta_tau, 1)")
    ratio = theta / (1.0 - theta)
    if _steep_case(tau, q):
        if theta < q / (2.0 * q - 2.0):
            return ratio * (q / 2.0 - 1.0)
        return theta / (2.0 * theta - 1.0)
    x = xi(tau, q)
    if theta < x / (2.0 * x - 1.0):
        return ratio * (x - 1.0)
    return theta / (2.0 * theta - 1.0)


def psi3_optimum(theta_tau, tau, q):
    """(best psi3 over theta in [theta_tau, 1), maximizing theta)."""
    _check_poly_domain(tau, q)
    if not 0.5 < theta_tau < 1.0:
        raise DomainError("theta_tau must lie in (1/2, 1)")
    cap = theta_tau / (2.0 * theta_tau - 1.0)
    if _steep_case(tau, q):
        if q < 2.0 * theta_tau / (2.0 * theta_tau - 1.0):
            return q / 2.0, q / (2.0 * q - 2.0)
        return cap, theta_tau
    x = xi(tau, q)
    if q < tau / (tau - 1.0) * theta_tau / (2.0 * theta_tau - 1.0) + 1.0:
        return x, x / (2.0 * x - 1.0)
    return cap, theta_tau


@dataclass(frozen=True)
class RateExponents:
    psi1: float
    psi2: float
    psi3: float
    psi3_star: float
    theta_star: float


def psi_exponents(theta_tau, tau, q, theta):
    """All closed-form decay exponents at (theta_tau, tau, q, theta)."""
    best, arg = psi3_optimum(theta_tau, tau, q)
    return RateExponents(
        psi1=psi1(tau, q),
        psi2=psi2(theta_tau, tau, q, theta),
        psi3=psi3(theta_tau, tau, q, theta),
        psi3_star=best,
        theta_star=arg,
    )


@dataclass(frozen=True)
class RatePrediction:
    regime: str  # "small_exponent" (theta_F <= 1/2) or "large_exponent"
    schedule: str  # "exponential" or "polynomial"
    kind: str  # "r_linear" or "power"
    exponent: float | None  # e in O(k^-e) for power kind

    @property
    def label(self):
        if self.kind == "r_linear":
            return "R-linear"
        return f"O(k^-{self.exponent:g})"


def predicted_rate(theta_F, schedule_rule):
    """Predicted asymptotic decay of ||x_k - x*|| for a given theta_F.

    Exponential schedules give R-linear decay when theta_F <= 1/2 and the
    power k^-(1-theta_F)/(2 theta_F - 1) otherwise; polynomial schedules with
    q > 2 give the power min(q/2 - 1, (1-theta_F)/(2 theta_F - 1)) (the
    second term only binds when theta_F > 1/2).
    """
    if not 0.0 <= theta_F < 1.0:
        raise DomainError("theta_F must lie in [0, 1)")
    regime = "small_exponent" if theta_F <= 0.5 else "large_exponent"
    if isinstance(schedule_rule, Exponential):
        if theta_F <= 0.5:
            return RatePrediction(regime, "exponential", "r_linear", None)
        return RatePrediction(
            regime,
            "exponential",
            "power",
            (1.0 - theta_F) / (2.0 * theta_F - 1.0),
        )
    if isinstance(schedule_rule, Polynomial):
        q = schedule_rule.q
        if not q > 2.0:
            raise UnsupportedSchedule("polynomial prediction needs q > 2")
        e = q / 2.0 - 1.0
        if theta_F > 0.5:
            e = min(e, (1.0 - theta_F) / (2.0 * theta_F - 1.0))
        return RatePrediction(regime, "polynomial", "power", e)
    raise UnsupportedSchedule(
        f"no rate prediction for rule {type(schedule_rule).__name__}"
    )


# ---------------------------------------------------------------------------
# empirical decay fitting


def _distances(trace, x_star=None):
    """Distance-to-reference sequence indexed by iterate number.

    With stored iterates, distances go to x_star; without an explicit
    reference the final iterate serves as proxy (excluded from the fit) and
    the raw distances are replaced by their monotone tail envelope
    sup_{i>=k} d_i, since inexact iterates wander inside the certified
    tolerance band while the rate guarantees bound the envelope.  Without
    iterates, the cumulative tail of step norms upper-bounds the distance
    and shares its decay rate.
    """
    if getattr(trace, "iterates", None):
        its = trace.iterates
        if x_star is not None:
            ref = np.asarray(x_star, dtype=float)
            pts = its
        else:
            ref = its[-1]
            pts = its[:-1]
        ks = np.arange(len(pts), dtype=float)
        ds = np.array([float(np.linalg.norm(x - ref)) for x in pts])
        if x_star is None and ds.size:
            ds = np.maximum.accumulate(ds[::-1])[::-1]
        return ks, ds
    steps = np.array([row.step_norm for row in trace.rows], dtype=float)
    if steps.size == 0:
        return np.array([]), np.array([])
    tails = np.cumsum(steps[::-1])[::-1]
    return np.arange(steps.size, dtype=float), tails


def fit_decay(trace, mode="linear", x_star=None):
    """Least-squares decay fit on the trace tail.

    linear mode regresses log d_k on k (R-linear check: slope = log rho);
    power mode regresses log d_k on log k (power check: slope = -e).  The
    first 25% of the sequence is discarded as warm-up; at least 20 usable
    points must remain or TooShort is raised.  Returns (slope, r_squared).
    """
    if mode not in ("linear", "power"):
        raise ValueError(f"unknown fit mode {mode!r}")
    ks, ds = _distances(trace, x_star=x_star)
    start = int(math.floor(0.25 * ks.size))
    ks, ds = ks[start:], ds[start:]
    keep = ds > 0
    if np.any(keep):
        keep &= ds > _REL_FLOOR * ds[keep].max()
    if mode == "power":
        keep &= ks >= 1
    ks, ds = ks[keep], ds[keep]
    if ks.size < 20:
        raise TooShort(
            f"only {ks.size} usable points after warm-up trim (need >= 20)"
        )
    xs = ks if mode == "linear" else np.log(ks)
    ys = np.log(ds)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = ys - ys.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return float(slope), float(r2)
