"""Exception hierarchy shared by all modules."""


class GibbsError(Exception):
    """Base class for every error raised by this package."""


class PoleAtTau(GibbsError, ValueError):
    """Complex time sits on the pole lattice of csch(2τ)/coth(2τ)."""


class OutsideSemiModule(GibbsError, ValueError):
    """The requested complex time lies outside the maximal semi-module."""


class RegimeUndefined(GibbsError, ValueError):
    pass


class NonConvergence(GibbsError, RuntimeError):
    pass


class OverflowRisk(GibbsError, OverflowError):
    pass


class NonPositiveTime(GibbsError, ValueError):
    pass


class SpectralBoundViolated(GibbsError, ValueError):
    """Resolvent queried on or right of the spectral abscissa."""


class QuadratureUnderResolved(GibbsError, RuntimeError):
    pass


class QuadratureBudgetExceeded(GibbsError, RuntimeError):
    pass


class RecurrenceOverflow(GibbsError, OverflowError):
    pass


class SingularityTooStrong(GibbsError, ValueError):
    """The norm singularity at s=0 is not integrable (gamma >= 1)."""


class ContractionNotSatisfied(GibbsError, ValueError):
    pass


class InsufficientTrustedEigenvalues(GibbsError, RuntimeError):
    pass


class TrustedWindowEmpty(GibbsError, RuntimeError):
    pass


class SingularShift(GibbsError, ValueError):
    pass


class ConfigInvalid(GibbsError, ValueError):
    """Configuration failed validation; ``violations`` lists every problem."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
