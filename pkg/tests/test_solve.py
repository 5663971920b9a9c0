import math
import warnings

import numpy as np
import pytest

from branchflow import packing, potential, solve, surface
from branchflow.errors import DomainError
from branchflow.geometry import EUCLIDEAN, HYPERBOLIC
from branchflow.packing import Normalization, PackingMetric
from branchflow.potential import PotentialKind


def _cfg(geom, u):
    return solve.SolveConfig(PackingMetric.from_u(geom, u))


def test_uniform_start_is_already_stationary(klein, klein_beta0):
    """Vertex transitivity makes the uniform metric exactly stationary."""
    kind = PotentialKind("main_E", 1.0, klein_beta0)
    res = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))
    assert res.status == "found"
    assert res.iterations == 0
    assert res.residual < 1e-10
    assert res.certificate > 0


def test_two_start_agreement(klein, klein_beta0):
    kind = PotentialKind("main_E", 2.0, klein_beta0)
    rng = np.random.default_rng(1)
    r1 = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, rng.uniform(-0.5, 0.5, 24)))
    r2 = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, rng.uniform(-0.5, 0.5, 24)))
    assert r1.status == r2.status == "found"
    assert np.abs(r1.metric.u - r2.metric.u).max() < 1e-8
    # constancy of the branched alpha-curvature at the solution
    cf = packing.alpha_curvature(klein, r1.metric, 2.0, klein_beta0)
    s = packing.normalization(kind.normalization, klein, r1.metric, 2.0, klein_beta0)
    assert np.abs(cf.B - s).max() < 1e-9


def test_euclidean_literal_obstruction(klein):
    beta = surface.BranchAssignment.from_pairs(24, [(0, 1)])
    kind = PotentialKind("main_E", 1.0, beta, normalization=Normalization.literal())
    res = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))
    assert res.status == "no_stationary_point"
    assert res.iterations == 0
    assert abs(res.obstruction - 2 * math.pi) < 1e-12


def test_branched_normalization_clears_obstruction(klein):
    beta = surface.BranchAssignment.from_pairs(24, [(0, 1)])
    kind = PotentialKind("main_E", 1.0, beta, normalization=Normalization.branched())
    res = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))
    assert res.status == "found"
    assert res.certificate > 0


def test_hyperbolic_literal_has_no_stationary_point(klein, klein_beta0):
    """The gradient sum equals the total area, so Newton cannot find a zero;
    the result must be honest about it."""
    kind = PotentialKind("main_H", 1.0, klein_beta0,
                         normalization=Normalization.literal())
    rng = np.random.default_rng(2)
    res = solve.stationary_metric(
        klein, kind, _cfg(HYPERBOLIC, rng.uniform(-2.0, -0.5, 24)))
    assert res.status == "max_iterations"
    assert res.obstruction is not None and res.obstruction > 0


def test_hyperbolic_branch_floor_obstruction(klein):
    beta = surface.BranchAssignment.from_pairs(24, [(3, 2)])
    kind = PotentialKind("main_H", 1.0, beta, normalization=Normalization.literal())
    res = solve.stationary_metric(klein, kind, _cfg(HYPERBOLIC, -np.ones(24)))
    assert res.status == "no_stationary_point"
    assert abs(res.obstruction - 4 * math.pi) < 1e-12


def _round_trip_kind(tag, wt, alpha, seed):
    n = wt.vertex_count
    beta = surface.BranchAssignment.zero(n)
    geom = potential.kind_geometry(tag)
    rng = np.random.default_rng(seed)
    u_gen = (-2.0 + rng.uniform(-0.05, 0.05, n)) if geom == HYPERBOLIC \
        else rng.uniform(-0.1, 0.1, n)
    m = PackingMetric.from_u(geom, u_gen)
    if tag.startswith("area"):
        rbar = packing.area_curvature(wt, m, alpha, beta).R_HA
    else:
        rbar = packing.alpha_curvature(wt, m, alpha, beta).B
    assert (rbar <= 0).all()
    return PotentialKind(tag, alpha, beta, rbar=rbar), m


@pytest.mark.parametrize(
    "tag", ["prescribed_E", "prescribed_tanh_H", "area_E", "area_H"])
def test_prescribed_round_trip(tag, klein):
    kind, generator = _round_trip_kind(tag, klein, 2.0, seed=21)
    geom = potential.kind_geometry(tag)
    rng = np.random.default_rng(33)
    u0 = generator.u + rng.uniform(-0.3, 0.3, 24)
    if geom == HYPERBOLIC:
        u0 = np.minimum(u0, -0.05)
    res = solve.solve_prescribed(klein, kind, _cfg(geom, u0))
    assert res.status == "found"
    assert res.certificate > 0
    assert np.abs(res.metric.r / generator.r - 1).max() < 1e-8


def test_positive_rbar_warns(klein, klein_beta0):
    kind = PotentialKind("prescribed_E", 1.0, klein_beta0, rbar=np.ones(24))
    with pytest.warns(UserWarning, match="positive"):
        solve.solve_prescribed(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))


def test_kind_dispatch_guards(klein, klein_beta0):
    main = PotentialKind("main_E", 1.0, klein_beta0)
    with pytest.raises(DomainError):
        solve.solve_prescribed(klein, main, _cfg(EUCLIDEAN, np.zeros(24)))
    pres = PotentialKind("prescribed_E", 1.0, klein_beta0, rbar=-np.ones(24))
    with pytest.raises(DomainError):
        solve.stationary_metric(klein, pres, _cfg(EUCLIDEAN, np.zeros(24)))


def test_properness_probe(klein, klein_beta0):
    kind = PotentialKind("main_E", 1.0, klein_beta0)
    res = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))
    probe = solve.properness_probe(klein, kind, res, directions=16,
                                   radii=(1.0, 2.0, 4.0), seed=3)
    assert probe.strictly_increasing
    assert probe.value_at_solution < probe.minima[0]
    assert (np.diff(probe.minima) > 0).all()


def test_scaling_ray_of_solutions(klein, klein_beta0):
    """Euclidean stationary metrics form a ray: scaling r by c rescales B by
    c^{-alpha} and leaves the flow field unchanged."""
    alpha = 1.5
    kind = PotentialKind("main_E", alpha, klein_beta0)
    res = solve.stationary_metric(klein, kind, _cfg(EUCLIDEAN, np.zeros(24)))
    for c in (0.5, 2.0):
        scaled = PackingMetric(EUCLIDEAN, c * res.metric.r)
        b0 = packing.alpha_curvature(klein, res.metric, alpha, klein_beta0).B
        b1 = packing.alpha_curvature(klein, scaled, alpha, klein_beta0).B
        assert np.abs(b1 * c ** alpha - b0).max() < 1e-10
        w0 = potential.one_form(kind, klein, res.metric.u)
        w1 = potential.one_form(kind, klein, scaled.u)
        assert np.abs(w0 - w1).max() < 1e-10
