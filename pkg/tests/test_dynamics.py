import math
import warnings

import numpy as np
import pytest

from branchflow import dynamics, packing, potential, surface
from branchflow.errors import DomainError, RateEstimateError
from branchflow.geometry import EUCLIDEAN, HYPERBOLIC
from branchflow.packing import Normalization, PackingMetric

TIGHT = dynamics.IntegratorConfig(atol=1e-12, rtol=1e-12)


def _main_spec(wt, alpha, u0, kind="main_E", **kw):
    beta = kw.pop("beta", surface.BranchAssignment.zero(wt.vertex_count))
    geom = potential.kind_geometry(kind)
    return dynamics.FlowSpec(wt, kind, alpha, beta,
                             PackingMetric.from_u(geom, u0), **kw)


def test_flow_field_is_negative_gradient(klein, klein_beta0):
    rng = np.random.default_rng(0)
    u = rng.uniform(-0.5, 0.5, 24)
    spec = _main_spec(klein, 1.5, u)
    f = dynamics.flow_field(spec, u)
    omega = potential.one_form(spec.potential_kind(), klein, u)
    assert np.abs(f + omega).max() == 0


def test_area_flow_field_definition(klein, klein_beta0):
    rng = np.random.default_rng(1)
    u = rng.uniform(-0.3, 0.3, 24)
    rbar = -np.ones(24)
    gamma = np.linspace(0.5, 2.0, 24)
    spec = _main_spec(klein, 1.0, u, kind="area_E", rbar=rbar, gamma=gamma)
    f = dynamics.flow_field(spec, u)
    m = PackingMetric.from_u(EUCLIDEAN, u)
    cf = packing.area_curvature(klein, m, 1.0, klein_beta0)
    assert np.abs(f - gamma * (rbar - cf.R_HA)).max() < 1e-14


def test_main_h_requires_negative_chi(torus):
    beta = surface.BranchAssignment.zero(7)
    with pytest.raises(DomainError):
        dynamics.FlowSpec(torus, "main_H", 1.0, beta,
                          PackingMetric.from_u(HYPERBOLIC, -np.ones(7)))


def test_stationary_start_converges_immediately(torus):
    """Uniform flat torus metric is already stationary for the main flow."""
    beta = surface.BranchAssignment.zero(7)
    spec = dynamics.FlowSpec(torus, "main_E", 1.0, beta,
                             PackingMetric.from_u(EUCLIDEAN, np.full(7, 0.2)))
    traj = dynamics.integrate(spec, TIGHT)
    assert traj.status == "converged"
    assert len(traj.records) == 1
    assert traj.final.omega_inf < 1e-10
    with pytest.raises(RateEstimateError, match="insufficient|tail"):
        dynamics.estimate_rate(traj)


def test_main_flow_converges_and_conserves_sum(klein):
    rng = np.random.default_rng(3)
    u0 = rng.uniform(-0.5, 0.5, 24)
    u0 -= u0.mean()
    spec = _main_spec(klein, 1.0, u0)
    traj = dynamics.integrate(spec, TIGHT)
    assert traj.status == "converged"
    assert traj.final.omega_inf < 1e-10
    assert abs(traj.final.u.sum() - u0.sum()) < 1e-8
    # constant curvature at the end
    s = traj.final.s_alpha
    assert np.abs(traj.final.B - s).max() < 1e-8
    rate = dynamics.estimate_rate(traj)
    assert rate.decay_rate < 0
    assert rate.r_squared > 0.99


def test_potential_is_lyapunov(klein):
    rng = np.random.default_rng(4)
    u0 = rng.uniform(-0.5, 0.5, 24)
    spec = _main_spec(klein, 2.0, u0)
    traj = dynamics.integrate(spec, TIGHT)
    pots = np.array([rec.potential for rec in traj.records])
    assert (np.diff(pots) <= 1e-9).all()


def test_rk4_and_rk45_agree(klein):
    rng = np.random.default_rng(5)
    u0 = rng.uniform(-0.5, 0.5, 24)
    spec = _main_spec(klein, 1.0, u0)
    cfg4 = dynamics.IntegratorConfig(method="rk4_fixed", step=0.005, max_time=2.0)
    cfg45 = dynamics.IntegratorConfig(atol=1e-12, rtol=1e-12, max_time=2.0)
    a = dynamics.integrate(spec, cfg4)
    b = dynamics.integrate(spec, cfg45)
    assert abs(a.final.t - b.final.t) < 1e-12
    assert np.abs(a.final.u - b.final.u).max() < 1e-6


def test_degeneration_detected(octahedron):
    """A wildly positive prescribed curvature on a sphere forces blow-up."""
    beta = surface.BranchAssignment.zero(6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = dynamics.FlowSpec(
            octahedron, "prescribed_E", 1.0, beta,
            PackingMetric.from_u(EUCLIDEAN, np.zeros(6)),
            rbar=50.0 * np.ones(6))
    traj = dynamics.integrate(spec, dynamics.IntegratorConfig(max_time=100.0))
    assert traj.status == "degenerated"
    assert traj.detail


def test_prescribed_flow_reaches_target(klein, klein_beta0):
    rng = np.random.default_rng(6)
    u0 = rng.uniform(-2.0, -0.5, 24)
    rbar = -0.5 * np.ones(24)
    spec = _main_spec(klein, 1.0, u0, kind="prescribed_tanh_H", rbar=rbar)
    traj = dynamics.integrate(spec, TIGHT)
    assert traj.status == "converged"
    assert np.abs(traj.final.B - rbar).max() < 1e-9


def test_evolution_identity_residual(klein):
    rng = np.random.default_rng(7)
    u_e = rng.uniform(-0.5, 0.5, 24)
    spec_e = _main_spec(klein, 1.0, u_e)
    assert dynamics.curvature_evolution_residual(spec_e, u_e) < 1e-8
    u_h = rng.uniform(-2.0, -0.5, 24)
    spec_h = _main_spec(klein, 1.0, u_h, kind="main_H")
    assert dynamics.curvature_evolution_residual(spec_h, u_h) < 1e-8


def test_diagnostics_envelope_and_g(klein):
    rng = np.random.default_rng(8)
    u0 = rng.uniform(-0.5, 0.5, 24)
    spec = _main_spec(klein, 1.0, u0)
    traj = dynamics.integrate(spec, TIGHT)
    diag = dynamics.diagnostics(spec, traj)
    assert diag.envelope_ok
    assert diag.max_evolution_residual < 1e-8
    # G_v starts positive, G_w negative, both collapse toward zero
    assert diag.G_hi[0] > 0 > diag.G_lo[0]
    assert abs(diag.G_hi[-1]) < 1e-9 and abs(diag.G_lo[-1]) < 1e-9


def test_hyperbolic_g_clamped_at_zero(klein):
    rng = np.random.default_rng(9)
    u0 = rng.uniform(-2.0, -0.5, 24)
    spec = _main_spec(klein, 1.0, u0, kind="main_H")
    traj = dynamics.integrate(spec, dynamics.IntegratorConfig(max_time=1.0))
    assert all(rec.G_hi >= 0 for rec in traj.records)
    assert all(rec.G_lo <= 0 for rec in traj.records)


def test_normalization_probe(klein):
    rng = np.random.default_rng(10)
    u0 = rng.uniform(-0.5, 0.5, 24)
    beta = surface.BranchAssignment.from_pairs(24, [(0, 1), (1, 1)])
    spec = _main_spec(klein, 1.0, u0, beta=beta,
                      normalization=Normalization.literal())
    traj = dynamics.integrate(spec, dynamics.IntegratorConfig(max_time=0.5))
    probe = dynamics.literal_normalization_probe(spec, traj)
    assert abs(probe.expected_constant - 4 * math.pi) < 1e-12
    assert probe.max_deviation < 1e-9
    assert probe.obstructed


def test_scaling_invariance_of_flow_field(klein):
    rng = np.random.default_rng(11)
    u0 = rng.uniform(-0.5, 0.5, 24)
    shift = math.log(2.0)
    f1 = dynamics.flow_field(_main_spec(klein, 1.5, u0), u0)
    f2 = dynamics.flow_field(_main_spec(klein, 1.5, u0 + shift), u0 + shift)
    assert np.abs(f1 - f2).max() < 1e-10


def test_gamma_must_be_positive(klein, klein_beta0):
    with pytest.raises(DomainError):
        dynamics.FlowSpec(klein, "area_E", 1.0, klein_beta0,
                          PackingMetric.from_u(EUCLIDEAN, np.zeros(24)),
                          rbar=-np.ones(24), gamma=np.zeros(24))
