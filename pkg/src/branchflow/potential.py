"""Potential functionals over u-space: the branched curvature potentials,
their prescribed-curvature and area-element variants, and the deliberately
path-dependent sinh variant.

Potentials are line integrals of the one-form  omega_i du_i  with
omega_i = K_i + 2 pi beta_i - (target term).  All kinds except
``sinh_variant_H`` integrate a closed form, so the straight segment from the
base point is canonical; the sinh variant must be handed an explicit path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry, packing
from .errors import DomainError
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import Normalization
from .surface import BranchAssignment

MAIN_E = "main_E"
MAIN_H = "main_H"
SINH_VARIANT_H = "sinh_variant_H"
PRESCRIBED_E = "prescribed_E"
PRESCRIBED_TANH_H = "prescribed_tanh_H"
AREA_E = "area_E"
AREA_H = "area_H"

KIND_TAGS = (
    MAIN_E, MAIN_H, SINH_VARIANT_H,
    PRESCRIBED_E, PRESCRIBED_TANH_H, AREA_E, AREA_H,
)
_EUCLIDEAN_TAGS = (MAIN_E, PRESCRIBED_E, AREA_E)
_MAIN_TAGS = (MAIN_E, MAIN_H, SINH_VARIANT_H)


def kind_geometry(tag):
    return EUCLIDEAN if tag in _EUCLIDEAN_TAGS else HYPERBOLIC


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre with panel doubling."""

    order: int = 16
    initial_panels: int = 4
    tolerance: float = 1e-10
    max_panels: int = 4096

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("quadrature tolerance must be positive")


@dataclass(frozen=True)
class PotentialKind:
    """One of the seven potential functionals, with its parameters and base
    point.  ``normalization`` applies to the main/sinh kinds, ``rbar`` to the
    prescribed/area kinds."""

    tag: str
    alpha: float
    beta: BranchAssignment
    normalization: Normalization | None = None
    rbar: np.ndarray | None = None
    base_u: np.ndarray | None = None

    def __post_init__(self):
        if self.tag not in KIND_TAGS:
            raise DomainError(f"unknown potential kind {self.tag!r}")
        if self.alpha < 0:
            raise DomainError("alpha must be non-negative")
        if self.tag in _MAIN_TAGS:
            if self.normalization is None:
                object.__setattr__(
                    self, "normalization", packing.default_normalization(self.geom)
                )
        elif self.rbar is None:
            raise DomainError(f"kind {self.tag} requires a prescribed rbar")
        if self.rbar is not None:
            object.__setattr__(self, "rbar", np.asarray(self.rbar, dtype=float))

    @property
    def geom(self):
        return kind_geometry(self.tag)

    def base_point(self, n):
        """Default base: u = 0 (Euclidean, r = 1) or u(r = 1) (hyperbolic)."""
        if self.base_u is not None:
            return np.asarray(self.base_u, dtype=float)
        if self.geom == EUCLIDEAN:
            return np.zeros(n)
        return np.full(n, math.log(math.tanh(0.5)))

    def check_domain(self, u):
        if self.geom == HYPERBOLIC and (np.asarray(u) >= 0).any():
            raise DomainError(f"{self.tag}: u must be componentwise negative")


def _target_term(kind, wt, u):
    """The subtracted term of the one-form at u (s*w, Rbar*w, or Rbar*A)."""
    geom = kind.geom
    r = packing.r_from_u(geom, u)
    if kind.tag in (MAIN_E, MAIN_H):
        w = np.exp(kind.alpha * u)
        s = _normalization_value(kind, wt, w)
        return s * w
    if kind.tag == SINH_VARIANT_H:
        w = np.exp(kind.alpha * np.log(np.sinh(r / 2.0)))
        s = _normalization_value(kind, wt, w)
        return s * w
    if kind.tag in (PRESCRIBED_E, PRESCRIBED_TANH_H):
        return kind.rbar * np.exp(kind.alpha * u)
    # area kinds
    return kind.rbar * packing.area_element(geom, r, kind.alpha)


def _normalization_value(kind, wt, w):
    strat = kind.normalization
    if strat.tag == "explicit":
        return strat.value
    return strat.numerator(wt.euler_characteristic(), kind.beta.total_order()) / float(
        w.sum()
    )


def one_form(kind, wt, u):
    """omega(u): the integrand covector of the potential."""
    u = np.asarray(u, dtype=float)
    kind.check_domain(u)
    r = packing.r_from_u(kind.geom, u)
    K = geometry.curvature(wt, kind.geom, r)
    return K + 2.0 * math.pi * kind.beta.orders - _target_term(kind, wt, u)


def _segment_integral(kind, wt, a, b, order):
    """Gauss-Legendre integral of omega . du along the straight segment."""
    nodes, wts = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (nodes + 1.0)
    d = b - a
    total = 0.0
    for tk, wk in zip(t, wts):
        total += wk * float(one_form(kind, wt, a + tk * d) @ d)
    return 0.5 * total


def _refined_line_integral(kind, wt, a, b, quad):
    panels = quad.initial_panels
    prev = None
    while panels <= quad.max_panels:
        ts = np.linspace(0.0, 1.0, panels + 1)
        val = sum(
            _segment_integral(
                kind, wt, a + t0 * (b - a), a + t1 * (b - a), quad.order
            )
            for t0, t1 in zip(ts[:-1], ts[1:])
        )
        if prev is not None and abs(val - prev) < quad.tolerance:
            return val
        prev = val
        panels *= 2
    raise DomainError(
        f"quadrature did not converge after {quad.max_panels} panels "
        f"(last delta {abs(val - prev):.2e})"
    )


def potential(kind, wt, u, quad=QuadratureConfig()):
    """Line integral of the one-form from the kind's base point, along the
    straight u-space segment."""
    u = np.asarray(u, dtype=float)
    kind.check_domain(u)
    base = kind.base_point(len(u))
    kind.check_domain(base)
    if np.array_equal(u, base):
        return 0.0
    return _refined_line_integral(kind, wt, base, u, quad)


def potential_staircase(kind, wt, u, quad=QuadratureConfig()):
    """Same integral along the axis-parallel staircase path (coordinate k
    moved on the k-th leg).  Agrees with `potential` for closed kinds; the
    difference exposes path dependence for the sinh variant."""
    u = np.asarray(u, dtype=float)
    kind.check_domain(u)
    base = kind.base_point(len(u))
    total = 0.0
    current = base.copy()
    for k in range(len(u)):
        nxt = current.copy()
        nxt[k] = u[k]
        if nxt[k] != current[k]:
            total += _refined_line_integral(kind, wt, current, nxt, quad)
        current = nxt
    return total


def potential_along_path(kind, wt, waypoints, quad=QuadratureConfig()):
    """Integral along an explicit piecewise-linear path in u-space (required
    interface for the path-dependent sinh variant)."""
    total = 0.0
    pts = [np.asarray(p, dtype=float) for p in waypoints]
    for a, b in zip(pts[:-1], pts[1:]):
        kind.check_domain(a)
        kind.check_domain(b)
        total += _refined_line_integral(kind, wt, a, b, quad)
    return total


def potential_hessian(kind, wt, u):
    """Analytic Jacobian of the one-form (the potential's Hessian for every
    closed kind; the sinh variant returns the asymmetric omega-Jacobian)."""
    u = np.asarray(u, dtype=float)
    kind.check_domain(u)
    geom = kind.geom
    metric = packing.PackingMetric.from_u(geom, u)
    J = packing.curvature_jacobian(wt, metric).J
    alpha = kind.alpha
    if kind.tag in (MAIN_E, MAIN_H):
        w = np.exp(alpha * u)
        strat = kind.normalization
        if strat.tag == "explicit":
            return J - alpha * strat.value * np.diag(w)
        s = _normalization_value(kind, wt, w)
        return J - alpha * s * (np.diag(w) - np.outer(w, w) / float(w.sum()))
    if kind.tag == SINH_VARIANT_H:
        r = metric.r
        w = np.exp(alpha * np.log(np.sinh(r / 2.0)))
        dw = alpha * w * np.cosh(r / 2.0) ** 2  # d w_i / d u_i
        strat = kind.normalization
        if strat.tag == "explicit":
            return J - strat.value * np.diag(dw)
        s = _normalization_value(kind, wt, w)
        return J - s * np.diag(dw) + (s / float(w.sum())) * np.outer(w, dw)
    if kind.tag in (PRESCRIBED_E, PRESCRIBED_TANH_H):
        w = np.exp(alpha * u)
        return J - alpha * np.diag(kind.rbar * w)
    if kind.tag == AREA_E:
        w = np.exp(alpha * u)
        return J - math.pi * alpha * np.diag(kind.rbar * w)
    # AREA_H: d A_i / d u_i = 4 pi alpha sinh^alpha(r/2) cosh^2(r/2)
    r = metric.r
    dA = 4.0 * math.pi * alpha * np.exp(
        alpha * np.log(np.sinh(r / 2.0))
    ) * np.cosh(r / 2.0) ** 2
    return J - np.diag(kind.rbar * dA)


def one_form_jacobian_fd(kind, wt, u, step=1e-6):
    """Central-difference Jacobian of the one-form (verification oracle)."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    D = np.zeros((n, n))
    for j in range(n):
        up, um = u.copy(), u.copy()
        up[j] += step
        um[j] -= step
        D[:, j] = (one_form(kind, wt, up) - one_form(kind, wt, um)) / (2.0 * step)
    return D


def closedness_defect(kind, wt, u, step=1e-6):
    """max_{i != j} |d omega_i/d u_j - d omega_j/d u_i| via central
    differences; near zero for closed kinds, positive for the sinh variant."""
    D = one_form_jacobian_fd(kind, wt, u, step)
    A = np.abs(D - D.T)
    np.fill_diagonal(A, 0.0)
    return float(A.max())


def sum_zero_basis(n):
    """Orthonormal basis (n x (n-1)) of the hyperplane sum(u) = 0."""
    basis = np.zeros((n, n - 1))
    for k in range(1, n):
        col = np.zeros(n)
        col[:k] = 1.0
        col[k] = -float(k)
        basis[:, k - 1] = col / np.linalg.norm(col)
    return basis


def restricted_hessian_U(kind, wt, u):
    """Hessian conjugated onto the zero-mean hyperplane U (Euclidean main
    kind's natural domain)."""
    if kind.geom != EUCLIDEAN:
        raise DomainError("restricted Hessian is defined for Euclidean kinds")
    H = potential_hessian(kind, wt, u)
    B = sum_zero_basis(len(u))
    return B.T @ H @ B
