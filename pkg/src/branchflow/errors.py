"""Exception types shared across the package."""


class BranchflowError(Exception):
    """Base class for all package errors."""


class DocumentError(BranchflowError):
    """Malformed or schema-violating triangulation document."""


class SurfaceError(BranchflowError):
    """Combinatorial invariant violation (non-manifold, disconnected, ...)."""


class DegenerateTriangleError(BranchflowError):
    """A triangle inequality failed or an angle left (0, pi)."""

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class DomainError(BranchflowError):
    """A coordinate vector left the admissible domain of its geometry."""


class RateEstimateError(BranchflowError):
    """Trajectory tail unusable for a decay-rate fit."""
