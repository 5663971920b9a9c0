"""Metric coordinates, branched curvatures, normalization constants, and the
curvature Jacobian d(K + 2 pi beta)/du with its structural decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DomainError
from .geometry import EUCLIDEAN, HYPERBOLIC, check_geometry


def u_from_r(geom, r):
    """ln r (Euclidean) or ln tanh(r/2) (hyperbolic)."""
    check_geometry(geom)
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise DomainError("radii must be positive")
    if geom == EUCLIDEAN:
        return np.log(r)
    return np.log(np.tanh(r / 2.0))


def r_from_u(geom, u):
    check_geometry(geom)
    u = np.asarray(u, dtype=float)
    if geom == EUCLIDEAN:
        return np.exp(u)
    if (u >= 0).any():
        raise DomainError("hyperbolic u-coordinates must be negative")
    return 2.0 * np.arctanh(np.exp(u))


@dataclass(frozen=True)
class PackingMetric:
    """Per-vertex radii in a fixed background geometry."""

    geom: str
    r: np.ndarray

    def __post_init__(self):
        check_geometry(self.geom)
        r = np.asarray(self.r, dtype=float)
        if (r <= 0).any() or not np.isfinite(r).all():
            raise DomainError("radii must be positive and finite")
        object.__setattr__(self, "r", r)

    @classmethod
    def from_u(cls, geom, u):
        return cls(geom, r_from_u(geom, u))

    @property
    def u(self):
        return u_from_r(self.geom, self.r)

    @property
    def n(self):
        return len(self.r)


def to_u(metric):
    return metric.u


def from_u(geom, u):
    return PackingMetric.from_u(geom, u)


def conformal_weight(geom, r, alpha):
    """The flow weight w_i: r^alpha (Euclidean) or tanh^alpha(r/2)
    (hyperbolic); equals exp(alpha * u) in both geometries."""
    r = np.asarray(r, dtype=float)
    base = r if geom == EUCLIDEAN else np.tanh(r / 2.0)
    return np.exp(alpha * np.log(base))


@dataclass(frozen=True)
class Normalization:
    """How the constant s_alpha is formed: 'literal' uses 2 pi chi,
    'branched' uses 2 pi (chi + sum beta), 'explicit' a supplied value."""

    tag: str
    value: float | None = None

    def __post_init__(self):
        if self.tag not in ("literal", "branched", "explicit"):
            raise DomainError(f"unknown normalization {self.tag!r}")
        if self.tag == "explicit" and (
            self.value is None or not math.isfinite(self.value)
        ):
            raise DomainError("explicit normalization requires a finite value")

    @classmethod
    def literal(cls):
        return cls("literal")

    @classmethod
    def branched(cls):
        return cls("branched")

    @classmethod
    def explicit(cls, s):
        return cls("explicit", float(s))

    def numerator(self, chi, beta_sum):
        if self.tag == "literal":
            return 2.0 * math.pi * chi
        if self.tag == "branched":
            return 2.0 * math.pi * (chi + beta_sum)
        return None  # explicit: not a ratio


def default_normalization(geom):
    """Branched for Euclidean (keeps the gradient sum consistent when
    sum(beta) > 0), literal for hyperbolic."""
    return Normalization.branched() if geom == EUCLIDEAN else Normalization.literal()


def normalization(strategy, wt, metric, alpha, beta):
    """The scalar s_alpha for the given strategy at this metric."""
    if strategy.tag == "explicit":
        return strategy.value
    w = conformal_weight(metric.geom, metric.r, alpha)
    norm = float(w.sum())
    if norm <= 0:
        raise DomainError("alpha-norm must be positive")
    return strategy.numerator(wt.euler_characteristic(), beta.total_order()) / norm


@dataclass
class CurvatureField:
    K: np.ndarray
    B: np.ndarray | None = None
    A: np.ndarray | None = None
    R_HA: np.ndarray | None = None
    s_alpha: float | None = None
    alpha_norm: float | None = None


def alpha_curvature(wt, metric, alpha, beta):
    """Branched alpha-curvature B_i = (K_i + 2 pi beta_i) / w_i."""
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    K = geometry.curvature(wt, metric.geom, metric.r)
    w = conformal_weight(metric.geom, metric.r, alpha)
    B = (K + 2.0 * math.pi * beta.orders) / w
    return CurvatureField(K=K, B=B, alpha_norm=float(w.sum()))


def area_element(geom, r, alpha):
    """A_i = pi r^alpha (Euclidean) or 4 pi sinh^alpha(r/2) (hyperbolic)."""
    r = np.asarray(r, dtype=float)
    if geom == EUCLIDEAN:
        return math.pi * np.exp(alpha * np.log(r))
    return 4.0 * math.pi * np.exp(alpha * np.log(np.sinh(r / 2.0)))


def area_curvature(wt, metric, alpha, beta):
    """Branched A-curvature R_i = (K_i + 2 pi beta_i) / A_i."""
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    K = geometry.curvature(wt, metric.geom, metric.r)
    A = area_element(metric.geom, metric.r, alpha)
    return CurvatureField(K=K, A=A, R_HA=(K + 2.0 * math.pi * beta.orders) / A)


@dataclass
class CurvatureJacobian:
    """J = d(K + 2 pi beta)/du with its structural pieces."""

    J: np.ndarray

    @property
    def couplings(self):
        """C_ij = -J_ij for i != j (positive on edges)."""
        C = -self.J.copy()
        np.fill_diagonal(C, 0.0)
        return C

    @property
    def diagonal_excess(self):
        """S_i = row sum of J (zero Euclidean, positive hyperbolic)."""
        return self.J.sum(axis=1)


def curvature_jacobian(wt, metric, mode="analytic", fd_step=1e-6):
    """Assemble J by summing per-face angle-derivative blocks
    (K_i = 2 pi - sum theta implies J = -sum of blocks)."""
    geom, r = metric.geom, metric.r
    n = metric.n
    if mode == "finite_difference":
        u0 = metric.u
        J = np.zeros((n, n))
        for j in range(n):
            up, um = u0.copy(), u0.copy()
            up[j] += fd_step
            um[j] -= fd_step
            Kp = geometry.curvature(wt, geom, r_from_u(geom, up))
            Km = geometry.curvature(wt, geom, r_from_u(geom, um))
            J[:, j] = (Kp - Km) / (2.0 * fd_step)
        return CurvatureJacobian(J=J)
    faces = wt.face_array
    blocks = geometry.angle_derivative_block(geom, r[faces], wt.face_weights)
    J = np.zeros((n, n))
    rows = np.broadcast_to(faces[:, :, None], blocks.shape)
    cols = np.broadcast_to(faces[:, None, :], blocks.shape)
    np.subtract.at(J, (rows, cols), blocks)
    return CurvatureJacobian(J=J)


def gradient_sum_residual(wt, metric, alpha, beta, strategy):
    """sum_i (K_i + 2 pi beta_i - s_alpha w_i).

    Euclidean literal: equals 2 pi sum(beta) identically (Gauss-Bonnet);
    hyperbolic literal: equals total area + 2 pi sum(beta).
    """
    K = geometry.curvature(wt, metric.geom, metric.r)
    w = conformal_weight(metric.geom, metric.r, alpha)
    s = normalization(strategy, wt, metric, alpha, beta)
    return float(np.sum(K + 2.0 * math.pi * beta.orders - s * w))
