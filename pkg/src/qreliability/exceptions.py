"""Exception hierarchy shared across the package."""


class ReliabilityError(Exception):
    """Base class for all package errors."""


class ValidationError(ReliabilityError, ValueError):
    """An input parameter is non-finite or out of range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class RegimeError(ReliabilityError, ValueError):
    """Operation requested outside the regime where it is defined."""


class StepTooLarge(ReliabilityError, ValueError):
    pass


class InvariantBreach(ReliabilityError, RuntimeError):
    """A density-matrix invariant was violated during integration."""


class DegenerateSpectrum(ReliabilityError, ValueError):
    """The eigenvector basis of the reduced generator is singular."""


class DegenerateDissipation(DegenerateSpectrum):
    """Equal damping rates: the eigenvectors divide by the rate difference."""


class MethodDisagreement(ReliabilityError, RuntimeError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class BracketNotFound(ReliabilityError, RuntimeError):
    pass


class EmptySample(ReliabilityError, ValueError):
    pass
