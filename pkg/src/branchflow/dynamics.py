"""Time integration of the curvature flows, with convergence/degeneration
detection, exponential-rate estimation, and structural diagnostics.

All flows are integrated in u-coordinates, where every right-hand side is
minus a potential gradient (up to the positive per-vertex factor of the area
flows) and the hyperbolic domain u < 0 is convex.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry, packing, potential
from .errors import BranchflowError, DegenerateTriangleError, DomainError, RateEstimateError
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import Normalization, PackingMetric
from .potential import PotentialKind, QuadratureConfig

FLOW_KINDS = (
    "main_E", "main_H", "prescribed_E", "prescribed_tanh_H",
    "area_E", "area_H", "sinh_variant_H",
)
_MAIN_FLOWS = ("main_E", "main_H", "sinh_variant_H")
_AREA_FLOWS = ("area_E", "area_H")


@dataclass(frozen=True)
class FlowSpec:
    wt: object
    flow_kind: str
    alpha: float
    beta: object
    initial: PackingMetric
    normalization: Normalization | None = None
    rbar: np.ndarray | None = None
    gamma: np.ndarray | None = None  # positive weight for the area flows

    def __post_init__(self):
        if self.flow_kind not in FLOW_KINDS:
            raise DomainError(f"unknown flow kind {self.flow_kind!r}")
        if self.alpha < 0:
            raise DomainError("alpha must be non-negative")
        geom = potential.kind_geometry(self.flow_kind)
        if self.initial.geom != geom:
            raise DomainError(
                f"initial metric geometry {self.initial.geom} does not match "
                f"flow kind {self.flow_kind}"
            )
        if self.flow_kind == "main_H" and self.wt.euler_characteristic() > -1:
            raise DomainError("main_H requires Euler characteristic <= -1")
        if self.flow_kind in _MAIN_FLOWS:
            if self.normalization is None:
                object.__setattr__(
                    self, "normalization", packing.default_normalization(geom)
                )
        else:
            if self.rbar is None:
                raise DomainError(f"{self.flow_kind} requires a prescribed rbar")
            rbar = np.asarray(self.rbar, dtype=float)
            object.__setattr__(self, "rbar", rbar)
            if (rbar > 0).any():
                warnings.warn(
                    "prescribed curvature has positive components; convergence "
                    "guarantees assume rbar <= 0",
                    stacklevel=2,
                )
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float)
            if (g <= 0).any():
                raise DomainError("gamma weights must be positive")
            object.__setattr__(self, "gamma", g)

    @property
    def geom(self):
        return potential.kind_geometry(self.flow_kind)

    def potential_kind(self):
        return PotentialKind(
            self.flow_kind,
            self.alpha,
            self.beta,
            normalization=self.normalization,
            rbar=self.rbar,
        )


def flow_field(spec, u):
    """du/dt at u.  Main and prescribed kinds: minus the matching one-form;
    area kinds: gamma * (rbar - area curvature)."""
    u = np.asarray(u, dtype=float)
    if spec.flow_kind in _AREA_FLOWS:
        metric = PackingMetric.from_u(spec.geom, u)
        cf = packing.area_curvature(spec.wt, metric, spec.alpha, spec.beta)
        g = spec.gamma if spec.gamma is not None else 1.0
        return g * (spec.rbar - cf.R_HA)
    return -potential.one_form(spec.potential_kind(), spec.wt, u)


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45_adaptive"
    step: float = 0.01           # initial (adaptive) or fixed (rk4) step
    atol: float = 1e-9
    rtol: float = 1e-9
    max_time: float = 1e4
    max_steps: int = 200000
    convergence_tol: float = 1e-10
    min_angle: float = 1e-9
    u_cap: float = 50.0

    def __post_init__(self):
        if self.step <= 0 or self.atol <= 0 or self.rtol < 0:
            raise DomainError("step sizes and tolerances must be positive")
        if self.method not in ("rk45_adaptive", "rk4_fixed"):
            raise DomainError(f"unknown integrator {self.method!r}")


@dataclass
class TrajectoryRecord:
    t: float
    u: np.ndarray
    r: np.ndarray
    K: np.ndarray
    B: np.ndarray
    s_alpha: float | None
    omega: np.ndarray
    omega_inf: float
    potential: float
    G_hi: float
    G_lo: float


@dataclass
class Trajectory:
    spec: FlowSpec
    records: list
    status: str  # converged | max_time | degenerated | diverging
    detail: str = ""

    @property
    def final(self):
        return self.records[-1]

    def times(self):
        return np.array([rec.t for rec in self.records])


# Fehlberg 4(5) tableau; the 5th-order solution is propagated.
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8, 3680 / 513, -845 / 4104),
    (-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_RKF_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)


class _Degenerated(Exception):
    pass


def _kind_weight(spec, u):
    if spec.flow_kind == "sinh_variant_H":
        r = packing.r_from_u(HYPERBOLIC, u)
        return np.exp(spec.alpha * np.log(np.sinh(r / 2.0)))
    return np.exp(spec.alpha * u)


def _record_state(spec, kind, wt, t, u, pot_value):
    r = packing.r_from_u(spec.geom, u)
    metric = PackingMetric(spec.geom, r)
    cf = packing.alpha_curvature(wt, metric, spec.alpha, spec.beta)
    omega = potential.one_form(kind, wt, u)
    if spec.flow_kind in _MAIN_FLOWS:
        s = packing.normalization(spec.normalization, wt, metric, spec.alpha, spec.beta)
    else:
        s = None
    hi, lo = float(omega.max()), float(omega.min())
    if spec.geom == HYPERBOLIC:
        hi, lo = max(hi, 0.0), min(lo, 0.0)  # clamped G_p / G_q
    return TrajectoryRecord(
        t=float(t), u=u.copy(), r=r, K=cf.K, B=cf.B, s_alpha=s,
        omega=omega, omega_inf=float(np.abs(omega).max()),
        potential=pot_value, G_hi=hi, G_lo=lo,
    )


def _check_state(spec, cfg, u):
    if np.abs(u).max() > cfg.u_cap:
        raise _Degenerated(f"|u| exceeded cap {cfg.u_cap}")
    r = packing.r_from_u(spec.geom, u)
    th = geometry.face_angles(spec.geom, r[spec.wt.face_array], spec.wt.face_weights)
    if th.min() < cfg.min_angle:
        raise _Degenerated(f"inner angle below {cfg.min_angle}")


def _segment_potential(kind, wt, a, b):
    """Increment of the potential along one small straight segment.  A single
    Gauss panel suffices: the segment is one integrator step, so the order-8
    rule is far more accurate than the time-stepping error."""
    return potential._segment_integral(kind, wt, a, b, order=8)


def integrate(spec, cfg=IntegratorConfig()):
    """Integrate du/dt = flow_field until convergence, degeneration, or the
    time/step budget runs out."""
    wt = spec.wt
    kind = spec.potential_kind()
    u = spec.initial.u.copy()
    if spec.geom == HYPERBOLIC and (u >= 0).any():
        raise DomainError("hyperbolic initial metric must have u < 0")

    def f(x):
        if spec.geom == HYPERBOLIC and (x >= 0).any():
            raise _Degenerated("step left the domain u < 0")
        try:
            return flow_field(spec, x)
        except DegenerateTriangleError as exc:
            raise _Degenerated(str(exc)) from exc

    pot0 = potential.potential(kind, wt, u) if spec.flow_kind != "sinh_variant_H" else 0.0
    records = [_record_state(spec, kind, wt, 0.0, u, pot0)]
    if records[0].omega_inf < cfg.convergence_tol:
        return Trajectory(spec, records, "converged", "stationary start")

    t, h = 0.0, cfg.step
    status, detail = "max_time", ""
    try:
        _check_state(spec, cfg, u)
        for _ in range(cfg.max_steps):
            if t >= cfg.max_time:
                break
            h = min(h, cfg.max_time - t)
            if cfg.method == "rk4_fixed":
                u_new, err_ok = _rk4_step(f, u, h), True
            else:
                u_new, err_norm = _rkf45_step(f, u, h, cfg)
                err_ok = err_norm <= 1.0
                fac = 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0
                h_next = h * min(5.0, max(0.2, fac))
            if not err_ok:
                h = h_next
                if h < 1e-14 * max(1.0, abs(t)):
                    raise _Degenerated("step-size underflow")
                continue
            if spec.geom == HYPERBOLIC and (u_new >= 0).any():
                h *= 0.5  # backtrack to stay in u < 0
                if h < 1e-14 * max(1.0, abs(t)):
                    raise _Degenerated("step-size underflow at domain boundary")
                continue
            _check_state(spec, cfg, u_new)
            t += h
            pot_val = records[-1].potential + _segment_potential(kind, wt, u, u_new)
            u = u_new
            records.append(_record_state(spec, kind, wt, t, u, pot_val))
            if cfg.method == "rk45_adaptive":
                h = h_next
            if records[-1].omega_inf < cfg.convergence_tol:
                status = "converged"
                break
        else:
            status, detail = "max_time", "step budget exhausted"
    except _Degenerated as exc:
        status, detail = "degenerated", str(exc)
    return Trajectory(spec, records, status, detail)


def _rk4_step(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rkf45_step(f, u, h, cfg):
    """One embedded Fehlberg step.  Returns (u5, scaled error norm); the
    error scale uses the step increment so it is shift-invariant in u."""
    ks = [f(u)]
    for row in _RKF_A[1:]:
        ks.append(f(u + h * sum(a * k for a, k in zip(row, ks))))
    inc5 = h * sum(b * k for b, k in zip(_RKF_B5, ks))
    inc4 = h * sum(b * k for b, k in zip(_RKF_B4, ks))
    err = np.abs(inc5 - inc4)
    scale = cfg.atol + cfg.rtol * np.abs(inc5)
    return u + inc5, float((err / scale).max())


@dataclass
class RateEstimate:
    decay_rate: float  # lambda < 0 for exponential convergence
    r_squared: float
    records_used: int


def estimate_rate(traj, min_tail=20):
    """Least-squares slope of ln ||omega||_2 over the trailing half of a
    converged trajectory."""
    if traj.status != "converged":
        raise RateEstimateError(f"trajectory status is {traj.status!r}")
    recs = traj.records[len(traj.records) // 2:]
    if len(recs) < min_tail:
        raise RateEstimateError(
            f"insufficient decay: only {len(recs)} tail records"
        )
    ts = np.array([rec.t for rec in recs])
    norms = np.array([np.linalg.norm(rec.omega) for rec in recs])
    if norms.min() <= 0 or math.log(norms.max() / max(norms.min(), 1e-300)) < 1.0:
        raise RateEstimateError("insufficient decay in the trajectory tail")
    y = np.log(norms)
    A = np.vstack([ts, np.ones_like(ts)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(res[0]) if len(res) else float(((A @ coef - y) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return RateEstimate(decay_rate=float(coef[0]), r_squared=r2, records_used=len(recs))


@dataclass
class DiagnosticsReport:
    G_hi: np.ndarray
    G_lo: np.ndarray
    max_evolution_residual: float
    envelope_ok: bool
    envelope_margin: float
    G_hi_monotone_decreasing: bool
    G_lo_monotone_increasing: bool


def curvature_evolution_residual(spec, u):
    """|chain-rule dK/dt - coupling form| at one state.

    Euclidean: dK_i/dt = sum_{j~i} C_ij [(Kb_j - Kb_i) - s (w_j - w_i)];
    hyperbolic adds -S_i (Kb_i - s w_i), with C = -J off-diagonal and
    S = row sums of J.
    """
    wt = spec.wt
    u = np.asarray(u, dtype=float)
    metric = PackingMetric.from_u(spec.geom, u)
    jac = packing.curvature_jacobian(wt, metric)
    du = flow_field(spec, u)
    dK_chain = jac.J @ du

    kb = geometry.curvature(wt, spec.geom, metric.r) + 2.0 * math.pi * spec.beta.orders
    w = _kind_weight(spec, u)
    if spec.flow_kind in _MAIN_FLOWS:
        s = packing.normalization(spec.normalization, wt, metric, spec.alpha, spec.beta)
        target = s * w
    else:
        target = spec.rbar * w
    C = jac.couplings
    S = jac.diagonal_excess
    diff = (kb[None, :] - kb[:, None]) - (target[None, :] - target[:, None])
    rhs = (C * diff).sum(axis=1)
    if spec.geom == HYPERBOLIC:
        rhs -= S * (kb - target)
    return float(np.abs(dK_chain - rhs).max())


def diagnostics(spec, traj, envelope_slack=1e-9):
    """Per-record G extrema, the curvature-evolution identity residual, and
    the long-time radius envelope for Euclidean main runs."""
    if not traj.records:
        raise DomainError("empty trajectory")
    G_hi = np.array([rec.G_hi for rec in traj.records])
    G_lo = np.array([rec.G_lo for rec in traj.records])

    sample = traj.records[:: max(1, len(traj.records) // 16)]
    max_res = max(curvature_evolution_residual(spec, rec.u) for rec in sample)

    envelope_ok, margin = True, math.inf
    if spec.flow_kind == "main_E":
        d = int(spec.wt.degrees().max())
        if spec.normalization.tag == "explicit":
            bound = abs(spec.normalization.value) * float(
                np.exp(spec.alpha * traj.records[0].u).sum()
            )  # loose: |s| ||w||_1 at start; explicit s has no a-priori bound
        else:
            bound = abs(
                spec.normalization.numerator(
                    spec.wt.euler_characteristic(), spec.beta.total_order()
                )
            )
        beta_term = 2.0 * math.pi * spec.beta.orders
        a1 = (2.0 - d) * math.pi + beta_term - bound
        a2 = 2.0 * math.pi + beta_term + bound
        u0 = traj.records[0].u
        for rec in traj.records:
            du = rec.u - u0
            lo_margin = float((du + a2 * rec.t).min())
            hi_margin = float((-a1 * rec.t - du).min())
            margin = min(margin, lo_margin, hi_margin)
        envelope_ok = margin > -envelope_slack

    return DiagnosticsReport(
        G_hi=G_hi,
        G_lo=G_lo,
        max_evolution_residual=max_res,
        envelope_ok=envelope_ok,
        envelope_margin=margin,
        G_hi_monotone_decreasing=bool(np.all(np.diff(G_hi) <= 1e-9)),
        G_lo_monotone_increasing=bool(np.all(np.diff(G_lo) >= -1e-9)),
    )


@dataclass
class NormalizationProbe:
    gradient_sums: np.ndarray
    expected_constant: float | None
    max_deviation: float | None
    running_infimum: float
    obstructed: bool


def literal_normalization_probe(spec, traj):
    """Track sum_i omega_i along a main-flow run.  Euclidean literal: the
    sum is the constant 2 pi sum(beta); hyperbolic literal: total area plus
    2 pi sum(beta), strictly positive.  A positive running infimum flags
    that no interior stationary point is reachable."""
    if spec.flow_kind not in _MAIN_FLOWS:
        raise DomainError("probe applies to main flow kinds")
    sums = np.array([float(rec.omega.sum()) for rec in traj.records])
    expected = None
    max_dev = None
    if spec.geom == EUCLIDEAN and spec.normalization.tag in ("literal", "branched"):
        chi = spec.wt.euler_characteristic()
        num = spec.normalization.numerator(chi, spec.beta.total_order())
        expected = 2.0 * math.pi * (chi + spec.beta.total_order()) - num
        max_dev = float(np.abs(sums - expected).max())
    inf = float(sums.min())
    return NormalizationProbe(
        gradient_sums=sums,
        expected_constant=expected,
        max_deviation=max_dev,
        running_infimum=inf,
        obstructed=inf > 1e-8,
    )
