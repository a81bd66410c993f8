"""Inner-tolerance schedules and the variable-metric gamma rules.

The outer loop consumes a per-iteration tolerance eps_k.  Sequential
convergence theory needs three series to be summable simultaneously:

    sum eps_k,   sum sqrt(eps_k),   sum (tail_k)^(1 - 1/tau),

with tail_k = sum_{i >= k} eps_i and tau > 1 an auxiliary exponent.
Exponential rules always qualify; polynomial rules eps_k = eps0/(k+1)^q
qualify iff q > (2 tau - 1)/(tau - 1), relaxing to q > 2 when the auxiliary
function is known to satisfy the KL property for every tau.  The benchmark
default max(k^-2.01, 1e-8) trades summability for a practical floor.
"""

import math
from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# tolerance rules


@dataclass(frozen=True)
class Exponential:
    eps0: float
    q: float

    def __post_init__(self):
        if not (self.eps0 > 0 and 0 < self.q < 1):
            raise ValueError("Exponential rule needs eps0 > 0 and q in (0,1)")

    def at(self, k):
        return self.eps0 * self.q**k

    def tail(self, k):
        """Closed form sum_{i>=k} eps_i = eps0 q^k / (1-q)."""
        return self.eps0 * self.q**k / (1.0 - self.q)


@dataclass(frozen=True)
class Polynomial:
    eps0: float
    q: float

    def __post_init__(self):
        if not (self.eps0 > 0 and self.q > 0):
            raise ValueError("Polynomial rule needs eps0 > 0 and q > 0")

    def at(self, k):
        return self.eps0 / (k + 1.0) ** self.q

    def tail(self, k):
        """Integral upper bound eps0 / ((q-1) k^(q-1)), valid for q > 1, k >= 1."""
        if self.q <= 1:
            return math.inf
        if k < 1:
            return self.at(0) + self.tail(1)
        return self.eps0 / ((self.q - 1.0) * k ** (self.q - 1.0))


@dataclass(frozen=True)
class PowerFloor:
    """Benchmark default: eps_k = max(k^-power, floor) with eps_0 = 1.

    k^-power is undefined at k = 0; the k = 0 value is pinned to the k = 1
    value (= 1) so the schedule stays monotone nonincreasing.  The floor
    makes the series divergent, so this rule never validates in strict mode.
    """

    power: float = 2.01
    floor: float = 1e-8

    def at(self, k):
        if k <= 0:
            return 1.0
        return max(float(k) ** (-self.power), self.floor)


@dataclass(frozen=True)
class Constant:
    eps: float

    def at(self, k):
        return self.eps

    def tail(self, k):
        return 0.0 if self.eps == 0.0 else math.inf


Rule = Exponential | Polynomial | PowerFloor | Constant


@dataclass(frozen=True)
class ToleranceSchedule:
    rule: Rule
    tau: float = 2.0

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError("auxiliary exponent tau must exceed 1")

    def at(self, k):
        return epsilon_at(self, k)


def epsilon_at(schedule, k):
    """Tolerance value eps_k; k >= 0."""
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    rule = schedule.rule if isinstance(schedule, ToleranceSchedule) else schedule
    return rule.at(k)


# ---------------------------------------------------------------------------
# summability validation


@dataclass(frozen=True)
class ScheduleCheck:
    ok: bool
    reason: str | None = None


def polynomial_threshold(tau):
    """Smallest admissible polynomial exponent (exclusive): (2 tau - 1)/(tau - 1)."""
    return (2.0 * tau - 1.0) / (tau - 1.0)


def validate_schedule(schedule, relaxed=False):
    """Check the three summability conditions for a schedule.

    Strict mode uses the threshold q > (2 tau - 1)/(tau - 1); relaxed mode
    accepts any q > 2 (valid when the auxiliary function has the KL property
    for every tau > 1).  Constant rules qualify only at zero (the exact
    algorithm).  The benchmark floor rule diverges, but its power part has
    q = 2.01 > 2, so it passes only in relaxed mode and only as a
    finite-horizon convenience.
    """
    rule = schedule.rule
    if isinstance(rule, Exponential):
        return ScheduleCheck(True)
    if isinstance(rule, Polynomial):
        if relaxed:
            if rule.q > 2.0:
                return ScheduleCheck(True)
            return ScheduleCheck(False, f"polynomial exponent q={rule.q} <= 2")
        thr = polynomial_threshold(schedule.tau)
        if rule.q > thr:
            return ScheduleCheck(True)
        return ScheduleCheck(
            False,
            f"polynomial exponent q={rule.q} <= (2*tau-1)/(tau-1)={thr:g} "
            f"for tau={schedule.tau}",
        )
    if isinstance(rule, Constant):
        if rule.eps == 0.0:
            return ScheduleCheck(True)
        return ScheduleCheck(False, "constant positive tolerance is not summable")
    if isinstance(rule, PowerFloor):
        if relaxed:
            return ScheduleCheck(True)
        return ScheduleCheck(
            False,
            f"floor {rule.floor:g} makes the series divergent "
            "(practical benchmarking default, not summable)",
        )
    raise TypeError(f"unknown schedule rule {type(rule).__name__}")


def series_tails(schedule, k):
    """Tails of the three summability series at index k.

    Returns (sum_{i>=k} eps_i, sum_{i>=k} sqrt(eps_i),
    sum_{i>=k} (tau * tail_i)^(1-1/tau)).  Closed forms for the exponential
    rule; integral bounds for the polynomial rule.
    """
    rule, tau = schedule.rule, schedule.tau
    if isinstance(rule, Exponential):
        e0, q = rule.eps0, rule.q
        t1 = rule.tail(k)
        t2 = math.sqrt(e0) * math.sqrt(q) ** k / (1.0 - math.sqrt(q))
        l1 = tau * e0 / (1.0 - q)
        r = q ** (1.0 - 1.0 / tau)
        t3 = l1 ** (1.0 - 1.0 / tau) * r**k / (1.0 - r)
        return t1, t2, t3
    if isinstance(rule, Polynomial):
        q, e0 = rule.q, rule.eps0
        if k < 1:
            raise ValueError("polynomial tails need k >= 1")
        t1 = rule.tail(k)
        t2 = (
            2.0 * math.sqrt(e0) / (q - 2.0) * k ** (1.0 - q / 2.0)
            if q > 2
            else math.inf
        )
        expo = (1.0 - 1.0 / tau) * (q - 1.0) - 1.0
        e1 = tau * e0 / (q - 1.0)
        t3 = e1 ** (1.0 - 1.0 / tau) / expo * k ** (-expo) if expo > 0 else math.inf
        return t1, t2, t3
    if isinstance(rule, Constant) and rule.eps == 0.0:
        return 0.0, 0.0, 0.0
    raise TypeError("series tails are defined for summable rules only")


def partial_sum(schedule, upto):
    """Numeric partial sum of eps_k for k = 0..upto-1 (vectorized)."""
    rule = schedule.rule if isinstance(schedule, ToleranceSchedule) else schedule
    ks = np.arange(upto, dtype=float)
    if isinstance(rule, Exponential):
        return float(np.sum(rule.eps0 * rule.q**ks))
    if isinstance(rule, Polynomial):
        return float(np.sum(rule.eps0 / (ks + 1.0) ** rule.q))
    if isinstance(rule, Constant):
        return rule.eps * upto
    if isinstance(rule, PowerFloor):
        vals = np.maximum(np.maximum(ks, 1.0) ** (-rule.power), rule.floor)
        vals[0] = 1.0
        return float(np.sum(vals))
    raise TypeError(f"unknown schedule rule {type(rule).__name__}")


# ---------------------------------------------------------------------------
# metric gamma rules


@dataclass(frozen=True)
class GammaRule:
    """Scale of the proximal metric per outer iteration.

    kind "decay_floor": gamma_k = max((k+1)^(-1/2), floor)  (benchmark default)
    kind "constant":    gamma_k = value

    Both keep gamma_k inside fixed positive bounds, as the variable-metric
    theory requires.
    """

    kind: str = "decay_floor"
    value: float = 0.01

    def __post_init__(self):
        if self.kind not in ("decay_floor", "constant"):
            raise ValueError(f"unknown gamma rule kind {self.kind!r}")
        if not self.value > 0:
            raise ValueError("gamma rule value must be positive")

    def at(self, k):
        if self.kind == "constant":
            return self.value
        return max((k + 1.0) ** (-0.5), self.value)

    def bounds(self):
        """(gamma_lo, gamma_hi) valid for all k."""
        if self.kind == "constant":
            return self.value, self.value
        return self.value, 1.0
