"""Exception types shared across the package."""


class ToyCascadeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSite(ToyCascadeError):
    """A phase (or phase derivative) was requested at a site with zero modulus."""


class NonConvergence(ToyCascadeError):
    """An implicit solve failed to reach tolerance.

    Carries the time-step index at which the solve diverged.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"implicit solve failed to converge at step {step}")


class SolveFailed(ToyCascadeError):
    """A linear solve violated its residual bound."""


class NotPositive(ToyCascadeError):
    """A profile required to be strictly positive is not."""


class DoesNotFit(ToyCascadeError):
    """A compactly supported object does not fit inside the lattice window."""


class SupportTooSmall(ToyCascadeError):
    """The profile support is too short for the requested reduction."""


class BudgetExceeded(ToyCascadeError):
    """A brute-force computation was rejected by its cost guard."""


class NotSymmetric(ToyCascadeError):
    """A matrix expected to be symmetric is not, beyond tolerance."""


class IterationFailure(ToyCascadeError):
    """An iterative eigensolve did not converge or failed its residual check."""


class NonUniqueNearest(ToyCascadeError):
    """The nearest minimizer is not unique; the requested value is ill-defined."""


class Antipodal(ToyCascadeError):
    """The spherical log map is undefined for antipodal points."""


class ValidityGuard(ToyCascadeError):
    """A requested approximation is outside its validated regime."""


class ConfigError(ToyCascadeError):
    """Invalid CLI or sampler configuration."""
