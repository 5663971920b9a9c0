import math

import numpy as np
import pytest

from branchflow import geometry, packing
from branchflow.errors import DegenerateTriangleError, DomainError
from branchflow.geometry import EUCLIDEAN, HYPERBOLIC


def test_euclidean_edge_length_oracle():
    # scalar-math oracle, independent of the vectorized implementation
    r1, r2, phi = 1.3, 0.7, 0.4
    expected = math.sqrt(r1 * r1 + r2 * r2 + 2 * r1 * r2 * math.cos(phi))
    got = geometry.edge_length(EUCLIDEAN, r1, r2, phi)
    assert abs(got - expected) < 1e-15
    # orthogonal circles: Pythagoras
    assert abs(geometry.edge_length(EUCLIDEAN, 3.0, 4.0, math.pi / 2) - 5.0) < 1e-15
    # tangent circles: sum of radii
    assert abs(geometry.edge_length(EUCLIDEAN, 1.1, 2.2, 0.0) - 3.3) < 1e-15


def test_hyperbolic_edge_length_oracle():
    r1, r2, phi = 0.8, 0.5, 0.3
    arg = (math.cosh(r1) * math.cosh(r2)
           + math.sinh(r1) * math.sinh(r2) * math.cos(phi))
    expected = math.acosh(arg)
    got = geometry.edge_length(HYPERBOLIC, r1, r2, phi)
    assert abs(got - expected) < 1e-14
    # tangent circles add in hyperbolic geometry too
    assert abs(geometry.edge_length(HYPERBOLIC, 0.4, 0.9, 0.0) - 1.3) < 1e-14


def test_equilateral_triangle_angles():
    th = geometry.inner_angles(EUCLIDEAN, 2.0, 2.0, 2.0)
    assert np.abs(np.asarray(th) - math.pi / 3).max() < 1e-14
    # hyperbolic equilateral angles are strictly below pi/3
    th_h = geometry.inner_angles(HYPERBOLIC, 1.0, 1.0, 1.0)
    assert np.abs(th_h - th_h[0]).max() < 1e-14
    assert th_h[0] < math.pi / 3


def test_angle_sum_laws():
    rng = np.random.default_rng(2)
    r3 = rng.uniform(0.3, 3.0, (500, 3))
    phi3 = rng.uniform(0.0, math.pi / 2, (500, 3))
    th_e = geometry.face_angles(EUCLIDEAN, r3, phi3)
    assert np.abs(th_e.sum(axis=1) - math.pi).max() < 1e-12
    r3h = rng.uniform(0.1, 2.0, (500, 3))
    th_h = geometry.face_angles(HYPERBOLIC, r3h, phi3)
    sums = th_h.sum(axis=1)
    assert (sums < math.pi).all()
    # hyperbolic triangle area is the angle defect
    assert (math.pi - sums).min() > 0


def test_triangle_geometry_areas(octahedron):
    r = np.full(6, 1.0)
    tg = geometry.triangle_geometry(EUCLIDEAN, octahedron, r, octahedron.faces[0])
    # Heron oracle for the equilateral side computed by the weighted law
    side = geometry.edge_length(EUCLIDEAN, 1.0, 1.0, 0.5)
    assert abs(tg.area - math.sqrt(3) / 4 * side * side) < 1e-13
    tg_h = geometry.triangle_geometry(HYPERBOLIC, octahedron, r, octahedron.faces[0])
    assert abs(tg_h.area - (math.pi - sum(tg_h.angles))) < 1e-14


def test_degenerate_triangle_raises():
    with pytest.raises(DegenerateTriangleError):
        geometry.inner_angles(EUCLIDEAN, 1.0, 1.0, 2.5)


def test_bad_geometry_tag_rejected():
    with pytest.raises(DomainError):
        geometry.edge_length("spherical", 1.0, 1.0, 0.0)


def test_curvature_uniform_octahedron():
    # frozen oracle: uniform tangent packing on the octahedron gives
    # equilateral triangles, K = 2 pi - 4 (pi / 3) = 2 pi / 3
    from branchflow import surface
    wt = surface.builtin("octahedron", default_weight=0.0)
    K = geometry.curvature(wt, EUCLIDEAN, np.ones(6))
    assert np.abs(K - 2 * math.pi / 3).max() < 1e-13


def test_gauss_bonnet_both_geometries(octahedron, torus, klein):
    rng = np.random.default_rng(10)
    for wt in (octahedron, torus, klein):
        chi = wt.euler_characteristic()
        n = wt.vertex_count
        for _ in range(20):
            r = np.exp(rng.uniform(-0.5, 0.5, n))
            K = geometry.curvature(wt, EUCLIDEAN, r)
            assert abs(K.sum() - 2 * math.pi * chi) < 1e-9
            rh = packing.r_from_u(HYPERBOLIC, rng.uniform(-2.0, -0.5, n))
            Kh = geometry.curvature(wt, HYPERBOLIC, rh)
            area = geometry.total_area(wt, HYPERBOLIC, rh)
            assert abs(Kh.sum() - 2 * math.pi * chi - area) < 1e-9


def test_angle_derivative_block_matches_fd():
    rng = np.random.default_rng(4)
    for geom, lo, hi in ((EUCLIDEAN, 0.3, 3.0), (HYPERBOLIC, 0.1, 2.0)):
        r3 = rng.uniform(lo, hi, (100, 3))
        phi3 = rng.uniform(0.0, math.pi / 2, (100, 3))
        an = geometry.angle_derivative_block(geom, r3, phi3)
        fd = geometry.angle_derivative_block(geom, r3, phi3, mode="fd")
        assert np.abs(an - fd).max() < 1e-6


def test_angle_derivative_signs_and_symmetry():
    rng = np.random.default_rng(6)
    for geom, lo, hi in ((EUCLIDEAN, 0.3, 3.0), (HYPERBOLIC, 0.1, 2.0)):
        r3 = rng.uniform(lo, hi, (1000, 3))
        phi3 = rng.uniform(0.0, math.pi / 2, (1000, 3))
        blk = geometry.angle_derivative_block(geom, r3, phi3)
        diag = np.diagonal(blk, axis1=1, axis2=2)
        assert diag.max() < 0
        off = blk[:, ~np.eye(3, dtype=bool)]
        assert off.min() > 0
        assert np.abs(blk - np.swapaxes(blk, 1, 2)).max() < 1e-10
        col = blk.sum(axis=1)
        if geom == EUCLIDEAN:
            assert np.abs(col).max() < 1e-10
        else:
            assert col.max() < 0
