"""Seeded property suites: each re-checks one family of structural claims
(signs, symmetry, definiteness, closedness, convergence, scaling, curvature
identities) on random instances and reports measured margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, geometry, packing, potential, solve, surface
from .errors import DomainError
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import Normalization, PackingMetric
from .potential import PotentialKind

SUITES = (
    "geometry-signs",
    "jacobian-structure",
    "potential-closedness",
    "hessian-formulas",
    "flow-vs-newton",
    "scaling",
    "gauss-bonnet",
)


@dataclass
class Check:
    name: str
    margin: float   # positive = satisfied, with room to spare
    ok: bool


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)

    def add(self, name, margin, ok):
        self.checks.append(Check(name, float(margin), bool(ok)))

    # convenience for "measured value must stay below a threshold"
    def below(self, name, value, threshold):
        self.add(name, threshold - value, value < threshold)

    # "measured value must stay above a threshold"
    def above(self, name, value, threshold):
        self.add(name, value - threshold, value > threshold)

    @property
    def passed(self):
        return all(c.ok for c in self.checks)


def random_u(geom, n, rng):
    """Random u far from degeneracy: uniform[-0.5, 0.5] (Euclidean),
    uniform[-2, -0.5] (hyperbolic)."""
    if geom == EUCLIDEAN:
        return rng.uniform(-0.5, 0.5, n)
    return rng.uniform(-2.0, -0.5, n)


def _random_weights(wt, rng):
    keys = sorted({surface.edge_key(f[i], f[(i + 1) % 3])
                   for f in wt.faces for i in range(3)})
    weights = {k: float(rng.uniform(0.0, 1.2)) for k in keys}
    return surface.WeightedTriangulation(wt.vertex_count, wt.faces, weights=weights)


def _suite_geometry_signs(seed, samples=2000):
    rep = SuiteReport("geometry-signs", seed)
    rng = np.random.default_rng(seed)
    for geom in (EUCLIDEAN, HYPERBOLIC):
        lo, hi = (0.2, 5.0) if geom == EUCLIDEAN else (0.05, 2.5)
        r3 = rng.uniform(lo, hi, (samples, 3))
        phi3 = rng.uniform(0.0, math.pi / 2, (samples, 3))
        lengths = np.stack([
            geometry.edge_length(geom, r3[:, 0], r3[:, 1], phi3[:, 0]),
            geometry.edge_length(geom, r3[:, 1], r3[:, 2], phi3[:, 1]),
            geometry.edge_length(geom, r3[:, 2], r3[:, 0], phi3[:, 2]),
        ], axis=1)
        tri_margin = np.inf
        for k in range(3):
            other = lengths[:, [(k + 1) % 3, (k + 2) % 3]].sum(axis=1)
            tri_margin = min(tri_margin, float((other - lengths[:, k]).min()))
        rep.above(f"{geom}: triangle inequality margin", tri_margin, 0.0)
        th = geometry.face_angles(geom, r3, phi3)
        sums = th.sum(axis=1)
        if geom == EUCLIDEAN:
            rep.below("euclidean: |angle sum - pi|",
                      float(np.abs(sums - math.pi).max()), 1e-12)
        else:
            rep.above("hyperbolic: pi - angle sum", float((math.pi - sums).min()), 0.0)
        blk = geometry.angle_derivative_block(geom, r3, phi3)
        diag = np.diagonal(blk, axis1=1, axis2=2)
        off = blk[:, ~np.eye(3, dtype=bool)]
        rep.below("own-vertex angle derivative < 0", float(diag.max()), 0.0)
        rep.above("cross-vertex angle derivative > 0", float(off.min()), 0.0)
        sym = np.abs(blk - np.swapaxes(blk, 1, 2)).max()
        rep.below("block symmetry defect", float(sym), 1e-10)
        col = blk.sum(axis=1)
        if geom == EUCLIDEAN:
            rep.below("euclidean column sums (angle sum is constant)",
                      float(np.abs(col).max()), 1e-10)
        else:
            rep.below("hyperbolic column sums < 0", float(col.max()), 0.0)
        fd = geometry.angle_derivative_block(geom, r3[:200], phi3[:200], mode="fd")
        an = geometry.angle_derivative_block(geom, r3[:200], phi3[:200])
        rep.below("analytic vs finite-difference block", float(np.abs(an - fd).max()), 1e-6)
    return rep


def _suite_jacobian_structure(seed, metrics=100):
    rep = SuiteReport("jacobian-structure", seed)
    rng = np.random.default_rng(seed)
    wt = surface.builtin("klein_quartic_24", default_weight=0.4)
    adj = np.zeros((wt.vertex_count, wt.vertex_count), dtype=bool)
    for f in wt.faces:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            adj[f[a], f[b]] = adj[f[b], f[a]] = True
    sym_max = one_max = eig2_min = np.nan
    sym_max, one_max, pattern_ok = 0.0, 0.0, True
    eig2_min, hyp_min = np.inf, np.inf
    for _ in range(metrics):
        m = PackingMetric.from_u(EUCLIDEAN, random_u(EUCLIDEAN, wt.vertex_count, rng))
        J = packing.curvature_jacobian(wt, m).J
        sym_max = max(sym_max, float(np.abs(J - J.T).max()))
        one_max = max(one_max, float(np.abs(J @ np.ones(wt.vertex_count)).max()))
        ev = np.linalg.eigvalsh(J)
        eig2_min = min(eig2_min, float(ev[1]))
        if not ((np.diag(J) > 0).all()
                and (J[adj] < 0).all()
                and (np.abs(J[~adj & ~np.eye(wt.vertex_count, dtype=bool)]) == 0).all()):
            pattern_ok = False
        mh = PackingMetric.from_u(HYPERBOLIC, random_u(HYPERBOLIC, wt.vertex_count, rng))
        Jh = packing.curvature_jacobian(wt, mh).J
        hyp_min = min(hyp_min, float(np.linalg.eigvalsh(Jh).min()))
    rep.below("euclidean symmetry defect", sym_max, 1e-10)
    rep.below("euclidean ||J.1||_inf", one_max, 1e-9)
    rep.above("euclidean second-smallest eigenvalue", eig2_min, 0.0)
    rep.add("euclidean sign pattern exact", 1.0 if pattern_ok else -1.0, pattern_ok)
    rep.above("hyperbolic min eigenvalue", hyp_min, 0.0)
    m = PackingMetric.from_u(EUCLIDEAN, random_u(EUCLIDEAN, wt.vertex_count, rng))
    Ja = packing.curvature_jacobian(wt, m).J
    Jf = packing.curvature_jacobian(wt, m, mode="fd").J
    rep.below("analytic vs finite-difference Jacobian", float(np.abs(Ja - Jf).max()), 1e-6)
    return rep


def _closed_kind(tag, wt, rng, alpha=1.5):
    n = wt.vertex_count
    beta = surface.BranchAssignment.zero(n)
    geom = potential.kind_geometry(tag)
    if tag in ("main_E", "main_H", "sinh_variant_H"):
        return PotentialKind(tag, alpha, beta)
    u_gen = -2.0 + rng.uniform(-0.05, 0.05, n) if geom == HYPERBOLIC \
        else rng.uniform(-0.1, 0.1, n)
    m = PackingMetric.from_u(geom, u_gen)
    if tag.startswith("area"):
        rbar = packing.area_curvature(wt, m, alpha, beta).R_HA
    else:
        rbar = packing.alpha_curvature(wt, m, alpha, beta).B
    return PotentialKind(tag, alpha, beta, rbar=np.minimum(rbar, 0.0))


def _suite_potential_closedness(seed):
    rep = SuiteReport("potential-closedness", seed)
    rng = np.random.default_rng(seed)
    wt = surface.builtin("klein_quartic_24", default_weight=0.3)
    n = wt.vertex_count
    closed = ("main_E", "main_H", "prescribed_E", "prescribed_tanh_H", "area_E", "area_H")
    for tag in closed:
        geom = potential.kind_geometry(tag)
        kind = _closed_kind(tag, wt, rng)
        u = random_u(geom, n, rng) * (0.3 if geom == EUCLIDEAN else 1.0)
        straight = potential.potential(kind, wt, u)
        stair = potential.potential_staircase(kind, wt, u)
        rep.below(f"{tag}: straight vs staircase", abs(straight - stair), 2e-10)
    beta = surface.BranchAssignment.zero(n)
    u = random_u(HYPERBOLIC, n, rng)
    sinh2 = PotentialKind("sinh_variant_H", 2.0, beta)
    rep.above("sinh_variant_H closedness defect at alpha=2",
              potential.closedness_defect(sinh2, wt, u), 1e-4)
    sinh0 = PotentialKind("sinh_variant_H", 0.0, beta)
    rep.below("sinh_variant_H closedness defect at alpha=0",
              potential.closedness_defect(sinh0, wt, u), 1e-6)
    return rep


def _suite_hessian_formulas(seed):
    rep = SuiteReport("hessian-formulas", seed)
    rng = np.random.default_rng(seed)
    wt = surface.builtin("klein_quartic_24", default_weight=0.3)
    n = wt.vertex_count
    for tag in potential.KIND_TAGS:
        geom = potential.kind_geometry(tag)
        kind = _closed_kind(tag, wt, rng)
        u = random_u(geom, n, rng) * (0.3 if geom == EUCLIDEAN else 1.0)
        H = potential.potential_hessian(kind, wt, u)
        F = potential.one_form_jacobian_fd(kind, wt, u)
        rep.below(f"{tag}: analytic Hessian vs finite differences",
                  float(np.abs(H - F).max()), 1e-5)
    return rep


def _suite_flow_vs_newton(seed):
    rep = SuiteReport("flow-vs-newton", seed)
    rng = np.random.default_rng(seed)
    wt = surface.builtin("klein_quartic_24", default_weight=0.3)
    n = wt.vertex_count
    beta = surface.BranchAssignment.zero(n)
    u0 = random_u(EUCLIDEAN, n, rng)
    u0 -= u0.mean()
    spec = dynamics.FlowSpec(wt, "main_E", 1.0, beta,
                             PackingMetric.from_u(EUCLIDEAN, u0))
    cfg = dynamics.IntegratorConfig(atol=1e-12, rtol=1e-12)
    traj = dynamics.integrate(spec, cfg)
    rep.add("flow converged", 1.0 if traj.status == "converged" else -1.0,
            traj.status == "converged")
    kind = spec.potential_kind()
    res = solve.stationary_metric(
        wt, kind, solve.SolveConfig(PackingMetric.from_u(EUCLIDEAN, u0)))
    rep.add("newton found", 1.0 if res.status == "found" else -1.0,
            res.status == "found")
    if traj.status == "converged" and res.status == "found":
        uf = traj.final.u - traj.final.u.mean()
        un = res.metric.u - res.metric.u.mean()
        rep.below("||u_newton - u_flow||_inf", float(np.abs(uf - un).max()), 1e-6)
    return rep


def _suite_scaling(seed):
    rep = SuiteReport("scaling", seed)
    rng = np.random.default_rng(seed)
    wt = surface.builtin("klein_quartic_24", default_weight=0.3)
    n = wt.vertex_count
    beta = surface.BranchAssignment.zero(n)
    u0 = random_u(EUCLIDEAN, n, rng)
    shift = math.log(2.0)
    spec_a = dynamics.FlowSpec(wt, "main_E", 1.5, beta,
                               PackingMetric.from_u(EUCLIDEAN, u0))
    spec_b = dynamics.FlowSpec(wt, "main_E", 1.5, beta,
                               PackingMetric.from_u(EUCLIDEAN, u0 + shift))
    fa = dynamics.flow_field(spec_a, u0)
    fb = dynamics.flow_field(spec_b, u0 + shift)
    rep.below("flow field invariance under r -> 2r", float(np.abs(fa - fb).max()), 1e-10)
    # fixed steps give matched output times by construction
    cfg = dynamics.IntegratorConfig(method="rk4_fixed", step=0.01, max_time=3.0)
    ta = dynamics.integrate(spec_a, cfg)
    tb = dynamics.integrate(spec_b, cfg)
    same_grid = len(ta.records) == len(tb.records) and \
        float(np.abs(ta.times() - tb.times()).max()) < 1e-12
    rep.add("matched time grids", 1.0 if same_grid else -1.0, same_grid)
    if same_grid:
        dev = max(float(np.abs(rb.u - ra.u - shift).max())
                  for ra, rb in zip(ta.records, tb.records))
        rep.below("u-trajectory offset minus ln 2", dev, 1e-9)
    return rep


def _suite_gauss_bonnet(seed, metrics=100):
    rep = SuiteReport("gauss-bonnet", seed)
    rng = np.random.default_rng(seed)
    for name in ("octahedron", "moebius_torus_7", "klein_quartic_24"):
        wt = surface.builtin(name, default_weight=0.4)
        chi = wt.euler_characteristic()
        worst_e = worst_h = 0.0
        for _ in range(metrics):
            re_ = packing.r_from_u(EUCLIDEAN, random_u(EUCLIDEAN, wt.vertex_count, rng))
            K = geometry.curvature(wt, EUCLIDEAN, re_)
            worst_e = max(worst_e, abs(float(K.sum()) - 2.0 * math.pi * chi))
            rh = packing.r_from_u(HYPERBOLIC, random_u(HYPERBOLIC, wt.vertex_count, rng))
            Kh = geometry.curvature(wt, HYPERBOLIC, rh)
            area = geometry.total_area(wt, HYPERBOLIC, rh)
            worst_h = max(worst_h, abs(float(Kh.sum()) - 2.0 * math.pi * chi - area))
        rep.below(f"{name}: euclidean |sum K - 2 pi chi|", worst_e, 1e-9)
        rep.below(f"{name}: hyperbolic |sum K - 2 pi chi - area|", worst_h, 1e-9)
    return rep


_DISPATCH = {
    "geometry-signs": _suite_geometry_signs,
    "jacobian-structure": _suite_jacobian_structure,
    "potential-closedness": _suite_potential_closedness,
    "hessian-formulas": _suite_hessian_formulas,
    "flow-vs-newton": _suite_flow_vs_newton,
    "scaling": _suite_scaling,
    "gauss-bonnet": _suite_gauss_bonnet,
}


def run_suite(name, seed=0):
    if name not in _DISPATCH:
        raise DomainError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _DISPATCH[name](seed)
