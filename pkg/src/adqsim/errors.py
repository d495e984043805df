"""Exception types raised across the package."""


class AdqsimError(Exception):
    """Base class for all package errors."""


class CorrelationOutOfRange(AdqsimError):
    """A correlation coefficient lies outside [-1, 1]."""


class NotPositiveSemidefinite(AdqsimError):
    """The implied covariance matrix is not PSD; carries the offending eigenvalue."""

    def __init__(self, eigenvalue: float):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"correlation matrix is not positive semidefinite "
            f"(smallest eigenvalue {eigenvalue:.6g})"
        )


class InvalidRange(AdqsimError):
    """Quantizer range is empty or inverted."""


class BitsOutOfRange(AdqsimError):
    """Bits-per-symbol outside the supported [1, 16] range."""


class InvalidCorrectionBits(AdqsimError):
    """Correction bit count B must be >= 1."""


class MismatchedSymbolSizes(AdqsimError):
    """Alice/Bob/Eve quantizers do not share the same symbol alphabet."""


class GuardTooWide(AdqsimError):
    """Guard bands leave some data interval with non-positive length."""


class SymbolOutOfRange(AdqsimError):
    """A symbol index falls outside [0, M)."""


class EmptyInput(AdqsimError):
    """An estimator received no samples."""


class NoRetainedSamples(AdqsimError):
    """All protocol outcomes were discarded; metrics are undefined."""


class DegenerateDenominator(AdqsimError):
    """Public-cost ratio is undefined because the NEC agreement rate is ~1."""


class NoSchemes(AdqsimError):
    """An experiment plan contains no schemes to run."""
