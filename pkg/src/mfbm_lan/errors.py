"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MfbmError(Exception):
    """Base class for library errors."""


class DomainError(MfbmError, ValueError):
    """Argument outside the domain of a function (e.g. lambda = 0)."""


class RegimeError(MfbmError, ValueError):
    """Operation not defined in the Hurst regime of the given parameter."""


class ParameterError(MfbmError, ValueError):
    """Invalid model parameter or mismatched inputs."""


class NumericalError(MfbmError, RuntimeError):
    """A numerical procedure failed to reach its contract."""


class QuadratureError(NumericalError):
    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class EmbeddingError(NumericalError):
    """Circulant embedding produced a significantly negative eigenvalue."""


class FactorizationError(NumericalError):
    """Cholesky factorization of A = I + gamma T failed."""
