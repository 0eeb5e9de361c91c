"""Exception hierarchy for rbseq.

Validation problems derive from ``ValueError``; failures that only show up
while running a numerical procedure derive from ``NumericalError``. The CLI
maps the two families to different exit codes.
"""


class RenewalError(Exception):
    """Base class for all package errors."""


class ModelError(RenewalError, ValueError):
    """Invalid model parameters or inputs."""


class NumericalError(RenewalError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class NegativeMass(ModelError):
    pass


class ZeroDistribution(ModelError):
    pass


class InfiniteMean(ModelError):
    pass


class MassMismatch(ModelError):
    pass


class InvalidLambda(ModelError):
    pass


class InvalidExponent(ModelError):
    pass


class TailExceedsOne(ModelError):
    pass


class InvalidMean(ModelError):
    pass


class UnsupportedFamily(ModelError):
    pass


class SpecViolation(ModelError):
    pass


class NonPositiveEntry(ModelError):
    pass


class PatternTooLong(ModelError):
    pass


class ImpossibleHistory(ModelError):
    pass


class WindowTooLarge(ModelError):
    pass


class SecondMomentInfinite(ModelError):
    pass


class DegenerateVariance(ModelError):
    pass


class ZeroProbability(NumericalError):
    """An observed sequence has probability zero under the model."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class NotRenewable(NumericalError):
    pass


class HorizonTooShort(NumericalError):
    pass


class HorizonInsufficient(NumericalError):
    pass


class ConfigError(ModelError):
    """Malformed command-line configuration or model descriptor."""
