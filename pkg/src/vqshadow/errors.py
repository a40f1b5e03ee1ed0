"""Exception types shared across the package."""


class VQShadowError(Exception):
    """Base class for all package errors."""


class InvalidLetter(VQShadowError, ValueError):
    """A Pauli string contained a character outside {I, X, Y, Z}."""


class DimensionMismatch(VQShadowError, ValueError):
    pass


class PlanRejected(VQShadowError):
    """A measurement plan leaves at least one target term uncovered."""


class UncoveredTerm(VQShadowError, KeyError):
    """Estimation requested for a term with zero (or unknown) covering probability."""

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class SingularM(VQShadowError, ArithmeticError):
    """Every singular value of M fell below the cutoff."""


class EmptySample(VQShadowError, ValueError):
    pass
