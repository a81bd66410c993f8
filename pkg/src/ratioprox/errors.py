"""Exception types shared across the package."""


class RatioproxError(Exception):
    """Base class for all package-specific errors."""


class ZeroPoint(RatioproxError):
    """The point is the origin, where the ratio objective is undefined."""


class InfeasiblePoint(RatioproxError):
    """The point violates the box/ball constraint encoded in the numerator."""


class BadBounds(RatioproxError):
    """Box bounds with lower > upper in some coordinate."""


class BadShape(RatioproxError):
    """Dimension arguments violate the generator preconditions."""


class InvariantViolation(RatioproxError):
    """A declared model or runtime invariant failed; message names the check."""


class ParseError(RatioproxError):
    """Malformed instance file; message carries file/line context."""


class InnerSolverFailure(RatioproxError):
    """The inner Newton solver exhausted its budget before the error
    criterion could be certified.  ``partial_trace`` holds whatever the
    outer loop recorded up to the failure, when available."""

    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class LineSearchStall(RatioproxError):
    """Armijo backtracking exceeded its step-halving budget."""


class DegenerateInit(RatioproxError):
    """Initialization produced the origin; caller falls back."""


class ZeroIterate(RatioproxError):
    """An exact proximal step left the feasible ratio domain (x = 0)."""


class DomainError(RatioproxError):
    """Arguments outside the validity region of a rate formula."""


class TooShort(RatioproxError):
    """Trace has too few usable rows for a decay fit."""


class UnsupportedSchedule(RatioproxError):
    """Rate prediction is only available for exponential/polynomial rules."""
