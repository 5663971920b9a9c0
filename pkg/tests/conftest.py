import numpy as np
import pytest

from branchflow import surface
from branchflow.geometry import EUCLIDEAN, HYPERBOLIC


def random_u(geom, n, rng):
    """Random metrics far from degeneracy (the CLI convention)."""
    if geom == EUCLIDEAN:
        return rng.uniform(-0.5, 0.5, n)
    return rng.uniform(-2.0, -0.5, n)


@pytest.fixture(scope="session")
def octahedron():
    return surface.builtin("octahedron", default_weight=0.5)


@pytest.fixture(scope="session")
def torus():
    return surface.builtin("moebius_torus_7", default_weight=0.4)


@pytest.fixture(scope="session")
def klein():
    return surface.builtin("klein_quartic_24", default_weight=0.3)


@pytest.fixture(scope="session")
def klein_beta0(klein):
    return surface.BranchAssignment.zero(klein.vertex_count)
