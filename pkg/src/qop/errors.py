"""Exception hierarchy shared by all qop modules."""


class QopError(Exception):
    """Base class for every error raised by qop."""


class DomainError(QopError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(QopError, ValueError):
    """Shapes or dimensions are inconsistent."""


class DegreeError(DomainError):
    """A monomial exponent exceeds the generator degree k."""


class CoefficientRangeError(DomainError):
    """A D_k coefficient falls outside [0, 1].

    ``bits`` names the offending bitstring and ``value`` its coefficient.
    """

    def __init__(self, message: str, bits: str | None = None, value: float | None = None):
        super().__init__(message)
        self.bits = bits
        self.value = value


class CapabilityError(QopError, RuntimeError):
    """The request exceeds a configured size or degree limit.

    ``best`` optionally carries the best partial result found before giving up.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class VerificationError(QopError):
    """A channel failed a completeness or positivity check."""
