"""Exception hierarchy."""


class BergstatError(Exception):
    """Base class for all library errors."""


class DomainError(BergstatError, ValueError):
    """A point lies outside (or too close to the boundary of) the domain."""


class EvaluationError(BergstatError, ArithmeticError):
    """A quantity cannot be evaluated, e.g. a vanishing kernel value."""


class ConditioningError(BergstatError, ArithmeticError):
    """A linear-algebra construction is singular or numerically unusable."""


class NotPositiveDefinite(ConditioningError):
    pass


class SamplerError(BergstatError, RuntimeError):
    """Rejection sampling cannot proceed with an acceptable acceptance rate."""


class UnknownIdentity(BergstatError, KeyError):
    pass


class CriticalValueError(BergstatError, ValueError):
    """A point lies within tolerance of the critical-value set of a map."""


class NonConvergence(BergstatError, RuntimeError):
    """The diastasis minimiser failed to reach a stationary point."""


class ConfigError(BergstatError, ValueError):
    """An experiment configuration failed validation."""
