"""Exception hierarchy shared by all flatcorr modules."""


class FlatCorrError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FlatCorrError):
    """An input violates a documented invariant (shape, symmetry, domain)."""


class NotPositiveDefinite(ValidationError):
    """A matrix required to be strictly positive definite is not."""


class ZeroVariance(ValidationError):
    """A region has zero variance inside a correlation window."""

    def __init__(self, region: int, window: int):
        self.region = region
        self.window = window
        super().__init__(
            f"region {region} has zero variance in window {window}; "
            "Pearson correlation is undefined for a constant signal"
        )


class RankDeficient(ValidationError):
    """A windowed matrix or least-squares system does not have full rank."""


class DegenerateCovariance(ValidationError):
    """Too few distinct points to extract the requested principal directions."""


class FileFormatError(FlatCorrError):
    """A data file does not match its documented format; message carries context."""


class NumericalError(FlatCorrError):
    """An iterative numerical procedure failed to reach its target."""


class NonConvergence(NumericalError):
    """The iterative eigensolver did not converge (pathological input)."""


class MaxIterationsExceeded(NumericalError):
    """An iteration hit its cap before meeting its tolerance.

    Carries the last observed residual so callers can judge how close the
    iteration got.
    """

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        self.residual = residual
        self.iterations = iterations
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)


class LineSearchStalled(NumericalError):
    """Backtracking line search underflowed without an acceptable step."""
