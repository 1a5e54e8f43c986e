"""Exception types shared across the package."""


class GptMintError(Exception):
    """Base class for all library errors."""


class DimensionError(GptMintError, ValueError):
    """Vector or operator dimensions do not match."""


class ConeError(GptMintError):
    """A cone operation is unsupported for this variant, or failed numerically."""


class SolverError(GptMintError):
    """The conic solver did not produce a usable result."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class CertificateError(SolverError):
    """A returned optimum failed independent re-verification."""


class ValidationError(GptMintError, ValueError):
    """A theory, system, or bank strategy violates one of its invariants."""
