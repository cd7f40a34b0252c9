"""Exception types shared across the package.

Every operation rejects out-of-domain inputs with one of these typed
errors instead of returning NaN or silently clamping.
"""


class ZodpError(Exception):
    """Base class for all package errors."""


class ValidationError(ZodpError):
    """A parameter violates its declared domain."""


class StepSizeTooLarge(ValidationError):
    """Step size exceeds the bound admissible for the convexity class."""


class CNotContractive(ZodpError):
    """The optimal concentration slack is undefined because c >= 1."""


class NegativeRadicand(ZodpError):
    """The contraction-coefficient radicand came out negative."""


class QuadratureNonConvergence(ZodpError):
    """Numerical integration failed to reach the requested tolerance."""


class GridMismatch(ZodpError):
    """RDP curves evaluated on different order grids cannot be combined."""


class InfeasibleSchedule(ZodpError):
    """A shift schedule violates the recursion or sign constraints."""


class NoFeasibleSchedule(ZodpError):
    """No (tau, theta) cell admits a schedule with positive delta budget."""


class NoFeasibleK(ZodpError):
    """The direction-count lower bound exceeds d/2."""


class PreconditionViolated(ZodpError):
    """A closed-form guarantee was requested outside its preconditions."""


class ConfigError(ZodpError):
    """Command-line configuration is malformed."""
