"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so that scripts can tell
data problems apart from inputs that fall outside the theorem's regime.
"""


class SuproundError(Exception):
    """Base class; I/O and parse failures use it directly."""

    exit_code = 1


class ValidationError(SuproundError, ValueError):
    """Input data violates an invariant (names the offending field/index)."""

    exit_code = 2


class InfeasibleExampleError(ValidationError):
    """Counterexample parameters outside the constructible region."""


class GateError(SuproundError):
    """The marginal perturbation is too large for the correction to apply.

    Attributes
    ----------
    coordinate : int or None
        Zero-based coordinate whose gate failed.
    """

    exit_code = 3

    def __init__(self, message, coordinate=None, **details):
        super().__init__(message)
        self.coordinate = coordinate
        self.details = details


class DegenerateProfileError(GateError):
    """The threshold function vanishes at the requested epsilon."""


class SigmaRangeError(GateError):
    """Requested threshold value lies above the reachable range of sigma."""


class BoundViolation(SuproundError):
    """A certified bound or postcondition failed on the computed output."""

    exit_code = 4

    def __init__(self, message, index=None, **details):
        super().__init__(message)
        self.index = index
        self.details = details


class SolverError(SuproundError):
    """The entropic solver broke down numerically."""
