"""Exception types raised across the package."""


class DynsimError(Exception):
    """Base class for all package-specific errors."""


class NonFinite(DynsimError):
    """Input contains NaN or Inf."""


class EmbeddingTooLong(DynsimError):
    """Delay embedding does not fit in the series length."""


class NoFeasiblePoint(DynsimError):
    """No grid point satisfies the embedding constraints."""


class InvalidDimensions(DynsimError):
    """Matrix dimensions are empty or inconsistent with the request."""


class EmptySpectrum(DynsimError):
    """An empty singular-value list was supplied."""


class RankTooLarge(DynsimError):
    """Requested truncation rank exceeds the available dimensions."""


class SvdFailure(DynsimError):
    """SVD failed to converge."""


class EigenFailure(DynsimError):
    """Eigendecomposition failed to converge."""


class ShapeMismatch(DynsimError):
    """Operands have incompatible shapes."""


class SingularGram(DynsimError):
    """Kernel Gram matrix is numerically rank-deficient below the request."""


class Divergence(DynsimError):
    """Optimization loss exceeded the divergence guard (step size too large)."""


class RetractionSingular(DynsimError):
    """Cayley retraction hit a singular linear system."""


class ZeroMatrix(DynsimError):
    """Angular distance is undefined for a zero matrix."""


class DegenerateInput(DynsimError):
    """Input is identically zero after preprocessing."""


class NonFiniteBlowup(DynsimError):
    """Numerical integration left the finite range."""


class NoBump(DynsimError):
    """Ring network settled into spatially uniform activity."""


class ConfigError(DynsimError):
    """Run configuration is missing, malformed, or has an unsupported version."""


class PipelineStageError(DynsimError):
    """Wraps a failure with the pipeline stage where it occurred."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
