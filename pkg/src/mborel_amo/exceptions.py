"""Custom exceptions raised by mborel-amo."""


class MBorelError(Exception):
    """Base class for every error raised deliberately by the package."""


class RationalInputError(MBorelError, ValueError):
    """Raised when a continued fraction expansion terminates on a rational input."""


class InsufficientScalesError(MBorelError, ValueError):
    """Raised when too few convergent scales are available for an estimate."""


class HypothesisError(MBorelError, ValueError):
    """Raised when a bound formula is evaluated outside of its hypotheses."""


class EmptyMeasureError(MBorelError, ValueError):
    """Raised when an estimator has no mass to work with."""


class SingularRestrictionError(MBorelError, ArithmeticError):
    """Raised when the energy is an eigenvalue of a finite restriction."""


class DegenerateNodesError(MBorelError, ValueError):
    """Raised when a node set contains coincident cosine values."""


class WindowError(MBorelError, ValueError):
    """Raised when a lattice window cannot support the requested evaluation."""


class TruncationError(MBorelError, RuntimeError):
    """Raised when a finite truncation is too small for the requested spectral parameter."""

    def __init__(self, message: str, *, suggested_n: int) -> None:
        super().__init__(f"{message} (suggested N >= {suggested_n})")
        self.suggested_n = suggested_n


class EpsilonTooLargeError(MBorelError, ValueError):
    """Raised when 1/eps is below the smallest available omega value."""


class RegimeError(MBorelError, ValueError):
    """Raised when a computation is requested outside the regime it is valid for."""


class ConfigError(MBorelError, ValueError):
    """Raised when an experiment configuration cannot be loaded or validated."""


class ExportError(MBorelError, FileExistsError):
    """Raised when an export would overwrite an existing file without force."""
