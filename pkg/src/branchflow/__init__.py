"""Branched alpha-curvature flows on weighted triangulated closed surfaces.

Circle packing metrics in Euclidean and hyperbolic background geometry,
combinatorial curvature flows, variational potentials, stationary-metric
solvers, and structural diagnostics.
"""

from .errors import (
    BranchflowError,
    DegenerateTriangleError,
    DocumentError,
    DomainError,
    RateEstimateError,
    SurfaceError,
)
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import CurvatureField, Normalization, PackingMetric
from .surface import (
    BranchAssignment,
    WeightedTriangulation,
    builtin,
    check_branch_structure,
    load_branch_assignment,
    load_triangulation,
    validate,
)

__all__ = [
    "BranchAssignment",
    "BranchflowError",
    "CurvatureField",
    "DegenerateTriangleError",
    "DocumentError",
    "DomainError",
    "EUCLIDEAN",
    "HYPERBOLIC",
    "Normalization",
    "PackingMetric",
    "RateEstimateError",
    "SurfaceError",
    "WeightedTriangulation",
    "builtin",
    "check_branch_structure",
    "load_branch_assignment",
    "load_triangulation",
    "validate",
]

__version__ = "0.1.0"
