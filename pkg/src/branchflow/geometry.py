"""Per-edge and per-triangle metric geometry in Euclidean and hyperbolic
backgrounds: lengths, inner angles, areas, angle derivatives, and discrete
Gauss curvature.

All scalar kernels accept numpy arrays and broadcast, so batched property
tests run vectorized.  Angle derivatives are analytic (law-of-cosines chain
rule); a central-difference mode is kept as a verification oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangleError, DomainError

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"

_COS_SLACK = 1e-12


def check_geometry(geom):
    if geom not in (EUCLIDEAN, HYPERBOLIC):
        raise DomainError(f"unknown geometry {geom!r}")
    return geom


def _arccosh_stable(x):
    """arccosh via log1p; accurate for arguments just above 1."""
    y = np.asarray(x, dtype=float) - 1.0
    y = np.maximum(y, 0.0)
    return np.log1p(y + np.sqrt(y * (y + 2.0)))


def edge_length(geom, r_i, r_j, phi_ij):
    """Length of the edge between circles of radii r_i, r_j meeting at
    overlap angle phi_ij."""
    check_geometry(geom)
    r_i, r_j = np.asarray(r_i, dtype=float), np.asarray(r_j, dtype=float)
    if (r_i <= 0).any() or (r_j <= 0).any():
        raise DomainError("radii must be positive")
    c = np.cos(phi_ij)
    if geom == EUCLIDEAN:
        return np.sqrt(r_i * r_i + r_j * r_j + 2.0 * r_i * r_j * c)
    # cosh(l) - 1 as a sum of non-negative terms (c >= 0 for phi <= pi/2),
    # so tiny radii keep full relative precision
    y = (np.sinh(0.5 * (r_i + r_j)) ** 2
         + np.sinh(0.5 * (r_i - r_j)) ** 2
         + np.sinh(r_i) * np.sinh(r_j) * c)
    return np.log1p(y + np.sqrt(y * (y + 2.0)))


def _safe_arccos(x, context):
    x = np.asarray(x, dtype=float)
    if (np.abs(x) > 1.0 + _COS_SLACK).any():
        raise DegenerateTriangleError(f"degenerate triangle: {context}")
    return np.arccos(np.clip(x, -1.0, 1.0))


def inner_angles(geom, l_ij, l_jk, l_ki):
    """Inner angles (theta_i, theta_j, theta_k) of the triangle with the
    given side lengths, via the (hyperbolic) law of cosines."""
    check_geometry(geom)
    l_ij, l_jk, l_ki = (np.asarray(l, dtype=float) for l in (l_ij, l_jk, l_ki))
    if geom == EUCLIDEAN:
        cos_i = (l_ij**2 + l_ki**2 - l_jk**2) / (2.0 * l_ij * l_ki)
        cos_j = (l_ij**2 + l_jk**2 - l_ki**2) / (2.0 * l_ij * l_jk)
        cos_k = (l_jk**2 + l_ki**2 - l_ij**2) / (2.0 * l_jk * l_ki)
    else:
        ch_ij, ch_jk, ch_ki = np.cosh(l_ij), np.cosh(l_jk), np.cosh(l_ki)
        sh_ij, sh_jk, sh_ki = np.sinh(l_ij), np.sinh(l_jk), np.sinh(l_ki)
        cos_i = (ch_ij * ch_ki - ch_jk) / (sh_ij * sh_ki)
        cos_j = (ch_ij * ch_jk - ch_ki) / (sh_ij * sh_jk)
        cos_k = (ch_jk * ch_ki - ch_ij) / (sh_jk * sh_ki)
    ctx = f"lengths ({l_ij}, {l_jk}, {l_ki})"
    return (
        _safe_arccos(cos_i, ctx),
        _safe_arccos(cos_j, ctx),
        _safe_arccos(cos_k, ctx),
    )


@dataclass
class TriangleGeometry:
    lengths: tuple  # (l_ij, l_jk, l_ki)
    angles: tuple   # (theta_i, theta_j, theta_k)
    area: float     # hyperbolic: pi - sum(theta); euclidean: Heron (informational)


def triangle_geometry(geom, wt, r, face):
    """Realize one face of the surface under radii r."""
    i, j, k = face
    phis = (
        wt.weights[(min(i, j), max(i, j))],
        wt.weights[(min(j, k), max(j, k))],
        wt.weights[(min(k, i), max(k, i))],
    )
    r = np.asarray(r, dtype=float)
    l_ij = edge_length(geom, r[i], r[j], phis[0])
    l_jk = edge_length(geom, r[j], r[k], phis[1])
    l_ki = edge_length(geom, r[k], r[i], phis[2])
    try:
        angles = inner_angles(geom, l_ij, l_jk, l_ki)
    except DegenerateTriangleError as exc:
        raise DegenerateTriangleError(
            f"face {list(face)}: {exc}", face=tuple(face)
        ) from exc
    if geom == HYPERBOLIC:
        area = float(_hyperbolic_excess(np.asarray(l_ij), np.asarray(l_jk),
                                        np.asarray(l_ki)))
    else:
        s = (l_ij + l_jk + l_ki) / 2.0
        area = float(np.sqrt(max(s * (s - l_ij) * (s - l_jk) * (s - l_ki), 0.0)))
    return TriangleGeometry(
        lengths=(float(l_ij), float(l_jk), float(l_ki)),
        angles=tuple(float(a) for a in angles),
        area=area,
    )


# -- batched face kernels -------------------------------------------------------


def _face_lengths(geom, r3, phi3):
    """Side lengths for faces given per-face radii (..., 3) and weights
    (..., 3) ordered (phi_ij, phi_jk, phi_ki).  Returns (..., 3) lengths
    ordered (l_ij, l_jk, l_ki)."""
    ri, rj, rk = r3[..., 0], r3[..., 1], r3[..., 2]
    return np.stack(
        [
            edge_length(geom, ri, rj, phi3[..., 0]),
            edge_length(geom, rj, rk, phi3[..., 1]),
            edge_length(geom, rk, ri, phi3[..., 2]),
        ],
        axis=-1,
    )


def face_angles(geom, r3, phi3):
    """Inner angles (..., 3) at the three vertices of each face."""
    L = _face_lengths(geom, r3, phi3)
    th = inner_angles(geom, L[..., 0], L[..., 1], L[..., 2])
    return np.stack(th, axis=-1)


def _dtheta_dl(geom, L):
    """(..., 3, 3) matrix d theta_m / d l_e with vertex order (i, j, k) and
    edge order (ij, jk, ki)."""
    l_ij, l_jk, l_ki = L[..., 0], L[..., 1], L[..., 2]
    out = np.zeros(L.shape[:-1] + (3, 3))

    # per-angle: a = opposite side, b/c = adjacent sides
    def fill(m, a, b, c, ea, eb, ec):
        if geom == EUCLIDEAN:
            cosA = (b * b + c * c - a * a) / (2.0 * b * c)
            sinA = np.sqrt(np.clip(1.0 - cosA * cosA, 1e-30, None))
            dca = -a / (b * c)
            dcb = (b * b - c * c + a * a) / (2.0 * b * b * c)
            dcc = (c * c - b * b + a * a) / (2.0 * b * c * c)
        else:
            cha, chb, chc = np.cosh(a), np.cosh(b), np.cosh(c)
            sha, shb, shc = np.sinh(a), np.sinh(b), np.sinh(c)
            cosA = (chb * chc - cha) / (shb * shc)
            sinA = np.sqrt(np.clip(1.0 - cosA * cosA, 1e-30, None))
            dca = -sha / (shb * shc)
            dcb = (shb * shb * chc - (chb * chc - cha) * chb) / (shb * shb * shc)
            dcc = (shc * shc * chb - (chb * chc - cha) * chc) / (shb * shc * shc)
        out[..., m, ea] = -dca / sinA
        out[..., m, eb] = -dcb / sinA
        out[..., m, ec] = -dcc / sinA

    # theta_i: opposite l_jk, adjacent l_ij, l_ki
    fill(0, l_jk, l_ij, l_ki, 1, 0, 2)
    # theta_j: opposite l_ki, adjacent l_ij (=b), l_jk (=c)
    fill(1, l_ki, l_ij, l_jk, 2, 0, 1)
    # theta_k: opposite l_ij, adjacent l_jk, l_ki
    fill(2, l_ij, l_jk, l_ki, 0, 1, 2)
    return out


def _dl_dr(geom, r3, phi3, L):
    """(..., 3, 3) matrix d l_e / d r_n, edge order (ij, jk, ki)."""
    out = np.zeros(L.shape[:-1] + (3, 3))
    pairs = ((0, 1), (1, 2), (2, 0))  # vertex index pairs per edge
    for e, (p, q) in enumerate(pairs):
        rp, rq, phi = r3[..., p], r3[..., q], phi3[..., e]
        c = np.cos(phi)
        if geom == EUCLIDEAN:
            le = L[..., e]
            out[..., e, p] = (rp + rq * c) / le
            out[..., e, q] = (rq + rp * c) / le
        else:
            shl = np.sinh(L[..., e])
            out[..., e, p] = (np.sinh(rp) * np.cosh(rq) + np.cosh(rp) * np.sinh(rq) * c) / shl
            out[..., e, q] = (np.sinh(rq) * np.cosh(rp) + np.cosh(rq) * np.sinh(rp) * c) / shl
    return out


def angle_derivative_block(geom, r3, phi3, mode="analytic", fd_step=1e-6):
    """(..., 3, 3) matrix of d theta_m / d u_n for one face.

    u = ln r (Euclidean) or ln tanh(r/2) (hyperbolic).  The off-diagonal is
    symmetric and the Euclidean rows sum to zero.
    """
    check_geometry(geom)
    r3 = np.asarray(r3, dtype=float)
    phi3 = np.asarray(phi3, dtype=float)
    if mode == "finite_difference":
        return _angle_block_fd(geom, r3, phi3, fd_step)
    L = _face_lengths(geom, r3, phi3)
    dtl = _dtheta_dl(geom, L)
    dlr = _dl_dr(geom, r3, phi3, L)
    dr_du = r3 if geom == EUCLIDEAN else np.sinh(r3)
    block = np.einsum("...me,...en->...mn", dtl, dlr)
    return block * dr_du[..., None, :]


def _angle_block_fd(geom, r3, phi3, h):
    from .packing import r_from_u, u_from_r  # circular-lite: coordinate maps

    u = u_from_r(geom, r3)
    block = np.zeros(r3.shape[:-1] + (3, 3))
    for n in range(3):
        up, um = u.copy(), u.copy()
        up[..., n] += h
        um[..., n] -= h
        tp = face_angles(geom, r_from_u(geom, up), phi3)
        tm = face_angles(geom, r_from_u(geom, um), phi3)
        block[..., :, n] = (tp - tm) / (2.0 * h)
    return block


def curvature(wt, geom, r):
    """Discrete Gauss curvature K_i = 2 pi - sum of inner angles at v_i."""
    check_geometry(geom)
    r = np.asarray(r, dtype=float)
    faces = wt.face_array
    th = face_angles(geom, r[faces], wt.face_weights)
    if not np.isfinite(th).all():
        raise DegenerateTriangleError("non-finite angle in curvature evaluation")
    K = np.full(wt.vertex_count, 2.0 * math.pi)
    np.subtract.at(K, faces.ravel(), th.ravel())
    return K


def _hyperbolic_excess(a, b, c):
    """Hyperbolic triangle area (angle defect) via l'Huilier's identity,
    which stays positive and accurate when the defect is tiny."""
    s = (a + b + c) / 2.0
    prod = (np.tanh(s / 2.0)
            * np.tanh(np.maximum(s - a, 0.0) / 2.0)
            * np.tanh(np.maximum(s - b, 0.0) / 2.0)
            * np.tanh(np.maximum(s - c, 0.0) / 2.0))
    return 4.0 * np.arctan(np.sqrt(np.maximum(prod, 0.0)))


def total_area(wt, geom, r):
    """Sum of face areas (hyperbolic: angle deficits)."""
    r = np.asarray(r, dtype=float)
    L = _face_lengths(geom, r[wt.face_array], wt.face_weights)
    if geom == HYPERBOLIC:
        return float(np.sum(_hyperbolic_excess(L[..., 0], L[..., 1], L[..., 2])))
    s = L.sum(axis=-1) / 2.0
    prod = s * (s - L[..., 0]) * (s - L[..., 1]) * (s - L[..., 2])
    return float(np.sum(np.sqrt(np.maximum(prod, 0.0))))
