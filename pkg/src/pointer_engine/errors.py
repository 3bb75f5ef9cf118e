"""Exception and warning types shared across the package."""


class DimensionMismatch(ValueError):
    """Operator dimensions are incompatible."""


class CutoffError(ValueError):
    """Requested construction does not fit the Fock truncation."""


class SingularSystem(RuntimeError):
    """The stationary manifold is degenerate; no unique steady state."""


class PositivityError(RuntimeError):
    """Steady state has negative weight beyond the truncation noise floor."""


class StepSizeUnderflow(RuntimeError):
    """Time integrator cannot proceed; the generator is too stiff."""


class NonHermitianResult(RuntimeError):
    """A quantity that must be real came out with a large imaginary part."""


class ConsistencyError(RuntimeError):
    """An internal cross-check between two routes to the same value failed."""


class ParseError(ValueError):
    """Malformed configuration input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """Configuration value is syntactically fine but not allowed."""


class UnitarityDefectWarning(UserWarning):
    """Truncated displacement operator deviates from unitarity."""


class RegimeWarning(UserWarning):
    """Parameters are outside the regime the model was derived for."""


class ModelValidityWarning(UserWarning):
    """The master equation may be unreliable at these drive strengths."""
