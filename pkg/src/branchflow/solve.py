"""Direct stationary-metric computation.

Damped Newton iteration on the flow one-form, using each potential kind's
analytic Hessian, with Armijo backtracking on the squared gradient norm and a
gradient-descent fallback.  The Euclidean main kind is solved inside the
sum-zero subspace U by mean-subtraction; algebraically exact gradient-sum
obstructions are reported instead of iterated against.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import geometry, packing, potential
from .errors import DegenerateTriangleError, DomainError
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import PackingMetric
from .potential import PotentialKind

_MAIN_KINDS = ("main_E", "main_H")
_PRESCRIBED_KINDS = ("prescribed_E", "prescribed_tanh_H", "area_E", "area_H")


@dataclass(frozen=True)
class SolveConfig:
    initial: PackingMetric
    tolerance: float = 1e-10
    max_iterations: int = 100
    armijo_slope: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-14

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance must be positive")
        if not 0 < self.armijo_slope < 0.5:
            raise DomainError("Armijo slope fraction must lie in (0, 1/2)")
        if not 0 < self.backtrack < 1:
            raise DomainError("backtrack factor must lie in (0, 1)")


@dataclass
class StationaryResult:
    status: str  # found | no_stationary_point | max_iterations
    metric: PackingMetric | None
    residual: float
    iterations: int
    certificate: float | None  # min eigenvalue of the (restricted) Hessian
    obstruction: float | None  # gradient-sum lower bound when unsolvable


def _merit(kind, wt, u):
    try:
        with np.errstate(all="ignore"):
            omega = potential.one_form(kind, wt, u)
    except (DegenerateTriangleError, DomainError, FloatingPointError):
        return None, math.inf
    if not np.isfinite(omega).all():
        return None, math.inf
    return omega, float(omega @ omega)


def _certificate(kind, wt, u):
    if kind.tag == "main_E":
        H = potential.restricted_hessian_U(kind, wt, u)
    else:
        H = potential.potential_hessian(kind, wt, u)
    return float(np.linalg.eigvalsh(H).min())


def _project_U(u):
    return u - u.mean()


def _newton_loop(wt, kind, cfg, in_U):
    geom = potential.kind_geometry(kind.tag)
    u = cfg.initial.u.copy()
    if in_U:
        u = _project_U(u)
    omega, m = _merit(kind, wt, u)
    if omega is None:
        raise DomainError("initial metric degenerates a triangle")
    sum_inf = float(omega.sum())

    best_u, best_res = u.copy(), float(np.abs(omega).max())
    for it in range(cfg.max_iterations):
        res = float(np.abs(omega).max())
        if res < best_res:
            best_u, best_res = u.copy(), res
        if res < cfg.tolerance:
            return StationaryResult(
                status="found",
                metric=PackingMetric.from_u(geom, u),
                residual=res,
                iterations=it,
                certificate=_certificate(kind, wt, u),
                obstruction=None,
            )
        try:
            with np.errstate(all="ignore"):
                H = potential.potential_hessian(kind, wt, u)
        except (DegenerateTriangleError, DomainError):
            H = None
        if H is not None and np.isfinite(H).all():
            # lstsq handles the rank N-1 Euclidean main Hessian: its
            # minimal-norm solution is orthogonal to the constant kernel,
            # i.e. already in U
            d = np.linalg.lstsq(H, -omega, rcond=None)[0]
            if in_U:
                d = _project_U(d)
            slope = 2.0 * float(omega @ (H @ d))
        else:
            d, slope = None, 1.0
        if d is None or slope >= 0:  # fall back to the gradient direction
            d, slope = -omega, -2.0 * m
        u_try, accepted = None, False
        for d_cur, slope_cur in ((d, slope), (-omega, -2.0 * m)):
            step = 1.0
            while step >= cfg.min_step:
                cand = u + step * d_cur
                if geom == HYPERBOLIC and (cand >= 0).any():
                    step *= cfg.backtrack
                    continue
                omega_try, m_try = _merit(kind, wt, cand)
                if m_try <= m + cfg.armijo_slope * step * slope_cur:
                    u_try, omega, m = cand, omega_try, m_try
                    accepted = True
                    break
                step *= cfg.backtrack
            if accepted:
                break
        if not accepted:
            break
        u = _project_U(u_try) if in_U else u_try
        sum_inf = min(sum_inf, float(omega.sum()))

    # a gradient sum that stayed strictly positive at every iterate is
    # evidence that the one-form has no zero in the domain
    obstruction = sum_inf if sum_inf > 0 else None
    return StationaryResult(
        status="max_iterations",
        metric=PackingMetric.from_u(geom, best_u),
        residual=best_res,
        iterations=cfg.max_iterations,
        certificate=None,
        obstruction=obstruction,
    )


def stationary_metric(wt, kind, cfg):
    """Find a metric with constant branched alpha-curvature for a main kind."""
    if kind.tag not in _MAIN_KINDS:
        raise DomainError(f"stationary_metric expects a main kind, got {kind.tag!r}")
    if cfg.initial.geom != potential.kind_geometry(kind.tag):
        raise DomainError("initial metric geometry does not match the kind")
    norm = kind.normalization
    if kind.tag == "main_E" and norm.tag in ("literal", "branched"):
        # gradient sum is the exact constant 2pi(chi + sum beta) - numerator
        chi = wt.euler_characteristic()
        total = kind.beta.total_order()
        invariant = 2.0 * math.pi * (chi + total) - norm.numerator(chi, total)
        if abs(invariant) > cfg.tolerance:
            return StationaryResult(
                status="no_stationary_point",
                metric=None,
                residual=math.inf,
                iterations=0,
                certificate=None,
                obstruction=invariant,
            )
    if kind.tag == "main_H" and norm.tag == "literal":
        # gradient sum = total area + 2pi sum(beta); the branch part alone
        # is an exact positive lower bound
        floor = 2.0 * math.pi * kind.beta.total_order()
        if floor > cfg.tolerance:
            return StationaryResult(
                status="no_stationary_point",
                metric=None,
                residual=math.inf,
                iterations=0,
                certificate=None,
                obstruction=floor,
            )
    result = _newton_loop(wt, kind, cfg, in_U=(kind.tag == "main_E"))
    if (result.status != "found" and kind.tag == "main_H"
            and norm.tag == "literal" and result.metric is not None):
        # exact identity: the gradient sum equals total area + 2 pi sum(beta),
        # strictly positive, so no stationary point exists in the domain
        area = geometry.total_area(wt, HYPERBOLIC, result.metric.r)
        result.obstruction = area + 2.0 * math.pi * kind.beta.total_order()
    return result


def solve_prescribed(wt, kind, cfg):
    """Find the metric realizing a prescribed (tanh-/area-) alpha-curvature."""
    if kind.tag not in _PRESCRIBED_KINDS:
        raise DomainError(
            f"solve_prescribed expects a prescribed or area kind, got {kind.tag!r}"
        )
    if cfg.initial.geom != potential.kind_geometry(kind.tag):
        raise DomainError("initial metric geometry does not match the kind")
    if (kind.rbar > 0).any():
        warnings.warn(
            "prescribed curvature has positive components; uniqueness is only "
            "guaranteed for rbar <= 0",
            stacklevel=2,
        )
    return _newton_loop(wt, kind, cfg, in_U=False)


@dataclass
class PropernessProbe:
    radii: tuple
    minima: np.ndarray          # min over directions of F(u* + t d), per t
    value_at_solution: float
    strictly_increasing: bool
    failures: list              # (direction index, t, reason) for bad rays


def properness_probe(wt, kind, result, directions=64, radii=(1.0, 2.0, 4.0, 8.0), seed=0):
    """Sample the potential along rays from a found stationary point.

    Growth of the per-radius minimum over many random unit directions is
    numerical evidence that sublevel sets are compact.
    """
    if result.status != "found":
        raise DomainError("properness probe requires a found stationary point")
    geom = potential.kind_geometry(kind.tag)
    u_star = result.metric.u
    base = potential.potential(kind, wt, u_star)
    rng = np.random.default_rng(seed)
    n = u_star.size
    table = np.full((directions, len(radii)), np.nan)
    failures = []
    for k in range(directions):
        d = rng.standard_normal(n)
        if kind.tag == "main_E":
            d = _project_U(d)
        d /= np.linalg.norm(d)
        for j, t in enumerate(radii):
            cand = u_star + t * d
            if geom == HYPERBOLIC and (cand >= 0).any():
                failures.append((k, t, "ray leaves the domain u < 0"))
                continue
            try:
                table[k, j] = potential.potential(kind, wt, cand)
            except DegenerateTriangleError as exc:
                failures.append((k, t, str(exc)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        minima = np.nanmin(table, axis=0)
    increasing = bool(
        base < minima[0] and np.all(np.diff(minima[~np.isnan(minima)]) > 0)
    )
    return PropernessProbe(
        radii=tuple(radii),
        minima=minima,
        value_at_solution=base,
        strictly_increasing=increasing,
        failures=failures,
    )
