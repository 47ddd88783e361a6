"""Domain-free numerical kernels: CARE solver, RK4, Simpson averaging, finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EMFFError

CARE_TOL = 1e-10
CARE_MAXITER = 200


@dataclass(frozen=True)
class CareSolution:
    P: np.ndarray
    gain: np.ndarray
    residual_norm: float
    iterations: int


def care_residual(F, G, Wz, Wmu, P) -> np.ndarray:
    S = G @ np.linalg.solve(Wmu, G.T)
    return F.T @ P + P @ F + Wz - P @ S @ P


def _sign_iteration(H: np.ndarray, tol: float, maxiter: int) -> tuple[np.ndarray, int]:
    # Newton iteration for sign(H) with determinant scaling.
    N = H.shape[0] // 2
    Z = H.copy()
    for k in range(1, maxiter + 1):
        _, logdet = np.linalg.slogdet(Z)
        c = np.exp(logdet / (2 * N))
        Znew = 0.5 * (Z / c + c * np.linalg.inv(Z))
        delta = np.linalg.norm(Znew - Z, 1) / np.linalg.norm(Z, 1)
        Z = Znew
        if not np.all(np.isfinite(Z)):
            break
        if delta < tol:
            return Z, k
    raise EMFFError("care_no_convergence", f"sign iteration stalled after {maxiter} steps")


def _lyapunov_kron(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve A^T X + X A + C = 0 as one dense linear system."""
    N = A.shape[0]
    I = np.eye(N)
    L = np.kron(I, A.T) + np.kron(A.T, I)
    X = np.linalg.solve(L, -C.reshape(-1, order="F")).reshape(N, N, order="F")
    return 0.5 * (X + X.T)


def solve_care(F, G, Wz, Wmu, tol: float = CARE_TOL, maxiter: int = CARE_MAXITER) -> CareSolution:
    """Stabilizing solution of F^T P + P F + Wz - P G Wmu^-1 G^T P = 0.

    The matrix sign function of the Hamiltonian gives an initial P; a few
    Newton-Kleinman steps then polish it, which matters when the entries of
    G are many orders of magnitude smaller than those of Wz.

    Returns a :class:`CareSolution` holding P, the LQR gain
    ``K = -Wmu^-1 G^T P`` and the relative residual
    ``||res||_F / (1 + ||P||_F)``.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float).reshape(F.shape[0], -1)
    Wz = np.asarray(Wz, dtype=float)
    Wmu = np.atleast_2d(np.asarray(Wmu, dtype=float))
    N = F.shape[0]
    if F.shape != (N, N) or Wz.shape != (N, N) or Wmu.shape != (G.shape[1], G.shape[1]):
        raise ValueError("inconsistent CARE dimensions")
    if not np.allclose(Wmu, Wmu.T) or np.min(np.linalg.eigvalsh(Wmu)) <= 0:
        raise ValueError("Wmu must be symmetric positive definite")

    S = G @ np.linalg.solve(Wmu, G.T)
    H = np.block([[F, -S], [-Wz, -F.T]])
    try:
        W, iters = _sign_iteration(H, 1e-13, maxiter)
    except np.linalg.LinAlgError as exc:
        raise EMFFError("care_unstabilizable", "Hamiltonian has imaginary-axis eigenvalues") from exc

    I = np.eye(N)
    lhs = np.vstack([W[:N, N:], W[N:, N:] + I])
    rhs = -np.vstack([W[:N, :N] + I, W[N:, :N]])
    P = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    P = 0.5 * (P + P.T)

    def rel_res(P):
        return np.linalg.norm(care_residual(F, G, Wz, Wmu, P)) / (1.0 + np.linalg.norm(P))

    res = rel_res(P)
    for _ in range(4):
        if not np.isfinite(res) or res <= tol * 1e-3:
            break
        Pn = _lyapunov_kron(F - S @ P, Wz + P @ S @ P)
        rn = rel_res(Pn)
        if not rn < res:
            break
        P, res = Pn, rn
    if not np.isfinite(res) or res > tol:
        raise EMFFError("care_unstabilizable", f"residual floor {res:.3e} above tolerance {tol:.1e}")

    K = -np.linalg.solve(Wmu, G.T @ P)
    if np.max(np.linalg.eigvals(F + G @ K).real) >= 0:
        raise EMFFError("care_unstabilizable", "closed loop is not Hurwitz")
    return CareSolution(P=P, gain=K, residual_norm=float(res), iterations=iters)


def cross3(a, b) -> np.ndarray:
    """Cross product over the last axis of length-3 arrays; much cheaper than np.cross for single vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1 and b.ndim == 1:
        a0, a1, a2 = a
        b0, b1, b2 = b
        return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h``."""
    if not h > 0:
        raise ValueError("step must be positive")
    y = np.asarray(y, dtype=float)
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise EMFFError("integration_blowup", f"non-finite derivative near t={t!r}", t=t)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def quadrature_average(g: Callable[[float], np.ndarray], a: float, b: float, n: int):
    """Composite Simpson mean of ``g`` over [a, b] using ``n`` panels (n even)."""
    if not b > a:
        raise ValueError("need b > a")
    if n < 2 or n % 2:
        raise EMFFError("bad_panel_count", f"Simpson needs an even panel count >= 2, got {n}")
    t = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    vals = np.array([np.asarray(g(ti), dtype=float) for ti in t])
    total = np.tensordot(w, vals, axes=(0, 0)) * (b - a) / (3.0 * n)
    return total / (b - a)


def finite_difference_gradient(f: Callable[[np.ndarray], float], x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar map."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = eps
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EMFFError("fd_nonfinite", f"non-finite value at component {k}")
        grad.flat[k] = (fp - fm) / (2.0 * eps)
    return grad
