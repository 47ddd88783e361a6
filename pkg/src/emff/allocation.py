"""Closed-form amplitude pairs realizing a prescribed pair force, and the smooth power bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EMFFError
from .numerics import cross3

SGN_ZERO = 1e-15  # |r.f| below this fraction of |r||f| counts as zero
COLLINEAR = 1e-12  # |r x f| below this fraction of |r||f| takes the degenerate branch


@dataclass(frozen=True)
class PsiParams:
    eps1: float = 1e-3
    eps2: float = 1e-6


@dataclass(frozen=True)
class AllocationResult:
    c1: np.ndarray
    c2: np.ndarray
    R: np.ndarray
    branch: str  # "generic", "axial" or "zero_force"


def _sgn(value: float, scale: float) -> float:
    if abs(value) <= SGN_ZERO * scale:
        return 0.0
    return 1.0 if value > 0 else -1.0


def rotation_R(r, f_star) -> np.ndarray:
    """Rows: r direction, in-plane component of f_star orthogonal to r, and r x f_star direction.

    When r and f_star are collinear only the first row is kept; the others are zero.
    """
    r = np.asarray(r, dtype=float)
    f_star = np.asarray(f_star, dtype=float)
    d = np.sqrt(r @ r)
    if d == 0:
        raise EMFFError("zero_baseline", "relative position is zero")
    cross = cross3(r, f_star)
    cn = np.sqrt(cross @ cross)
    R = np.zeros((3, 3))
    R[0] = r / d
    if cn > COLLINEAR * d * np.sqrt(f_star @ f_star):
        R[1] = (d * d * f_star - (r @ f_star) * r) / (d * cn)
        R[2] = cross / cn
    return R


def amplitude_pair(r, f_star) -> AllocationResult:
    """Amplitudes (c1, c2) with f(r, c1, c2) = f_star exactly (up to rounding)."""
    r = np.asarray(r, dtype=float)
    f_star = np.asarray(f_star, dtype=float)
    R = rotation_R(r, f_star)
    d = np.sqrt(r @ r)
    fn = np.sqrt(f_star @ f_star)
    if fn == 0:
        zero = np.zeros(3)
        return AllocationResult(zero, zero.copy(), R, "zero_force")

    rf = r @ f_star
    s = _sgn(rf, d * fn)
    arf = abs(rf) if s else 0.0
    cross = cross3(r, f_star)
    cross2 = cross @ cross
    phi1 = np.sqrt(cross2 + d * d * fn * fn)
    # phi1 - |r.f| without cancellation; phi1^2 - (r.f)^2 = 2 |r x f|^2 when s != 0
    phi1_minus = 2.0 * cross2 / (phi1 + arf) if s else phi1
    phi2 = (2.0 - s * s) * phi1
    phi2_minus = phi1_minus if s else phi2

    for radicand in (arf + phi1, phi2_minus, arf + phi2, phi1_minus):
        if radicand < -1e-12:
            raise EMFFError("allocation_internal_error", f"negative radicand {radicand}")

    ax = -0.5 * s * np.sqrt((arf + phi1) / d)
    ay = np.sqrt(max(phi2_minus, 0.0) / d) / np.sqrt(2.0)
    bx = 0.5 * np.sqrt((arf + phi2) / d)
    by = -s * np.sqrt(max(phi1_minus, 0.0) / d) / np.sqrt(2.0)

    c1 = R.T @ np.array([ax, ay, 0.0])
    c2 = R.T @ np.array([bx, by, 0.0])
    branch = "generic" if R[2].any() else "axial"
    return AllocationResult(c1, c2, R, branch)


def psi(r, zeta, params: PsiParams = PsiParams()) -> float:
    """Smooth upper bound on the squared amplitude norms for a pair."""
    r = np.asarray(r, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    s2 = r @ r
    s = np.sqrt(s2)
    u = s2 * s * (r @ zeta)
    cross = cross3(r, zeta)
    g = s2**3 * (cross @ cross + s2 * (zeta @ zeta))
    return float(-0.25 * u * np.tanh(u / params.eps1) + np.sqrt(g + params.eps2))


def psi_grad(r, zeta, params: PsiParams = PsiParams()) -> tuple[float, np.ndarray, np.ndarray]:
    """Value of psi and its partial gradients with respect to r and zeta."""
    r = np.asarray(r, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    s2 = r @ r
    s = np.sqrt(s2)
    rz = r @ zeta
    zz = zeta @ zeta
    u = s2 * s * rz
    th = np.tanh(u / params.eps1)
    dT_du = -0.25 * (th + (u / params.eps1) * (1.0 - th * th))
    du_dr = 3.0 * s * rz * r + s2 * s * zeta
    du_dz = s2 * s * r

    cross = cross3(r, zeta)
    A = cross @ cross + s2 * zz
    s6 = s2**3
    root = np.sqrt(s6 * A + params.eps2)
    dg_dr = 6.0 * s2 * s2 * A * r + s6 * (2.0 * (zz * r - rz * zeta) + 2.0 * zz * r)
    dg_dz = s6 * (2.0 * (s2 * zeta - rz * r) + 2.0 * s2 * zeta)

    value = -0.25 * u * th + root
    return float(value), dT_du * du_dr + dg_dr / (2.0 * root), dT_du * du_dz + dg_dz / (2.0 * root)


def allocate_pair(r_ij, zeta_ij, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes (p_ij, p_ji) whose averaged pair force realizes |r_ij|^4 zeta_ij.

    Both amplitudes come from the (min, max)-ordered pair, so that
    f(r_ij, p_ij, p_ji) = |r_ij|^4 zeta_ij for either call order.
    """
    r_ij = np.asarray(r_ij, dtype=float)
    zeta_ij = np.asarray(zeta_ij, dtype=float)
    d2 = r_ij @ r_ij
    if d2 == 0:
        raise EMFFError("zero_baseline", f"pair ({i}, {j}) has zero separation")
    if i < j:
        res = amplitude_pair(r_ij, d2 * d2 * zeta_ij)
        return res.c1, res.c2
    res = amplitude_pair(-r_ij, -d2 * d2 * zeta_ij)
    return res.c2, res.c1


def allocate_all(r, zeta) -> dict:
    """Amplitudes for every ordered pair from stacked positions (n, 3) and stacked zeta."""
    r = np.asarray(r, dtype=float).reshape(-1, 3)
    zeta = np.asarray(zeta, dtype=float).reshape(-1, 3)
    n = r.shape[0]
    out = {}
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            out[(i, j)], out[(j, i)] = allocate_pair(r[i] - r[j], zeta[k], i, j)
            k += 1
    return out
