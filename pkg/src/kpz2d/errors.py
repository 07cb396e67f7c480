"""Exception hierarchy shared across the package."""


class Kpz2dError(Exception):
    """Base class for all package errors."""


class RegimeError(Kpz2dError):
    """Parameters outside the subcritical regime or other domain violations."""


class ConfigError(Kpz2dError):
    """Invalid experiment configuration (grid/scale invariants violated)."""


class NumericalError(Kpz2dError):
    """Fatal numerical failure (positivity loss, divergence)."""


class OracleResolutionError(Kpz2dError):
    """Oracle could not reach the requested tolerance within its grid budget.

    Carries the achieved error estimate in ``achieved``.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class DegenerateDenominatorError(Kpz2dError):
    """Denominator of the decomposition ratio statistically indistinguishable from zero."""
