"""Formation controller: LQR desired surrogate control wrapped by a soft-minimum relaxed CBF filter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import PsiParams, psi, psi_grad
from .dipole import C0, pair_list
from .errors import EMFFError
from .numerics import CareSolution, solve_care


@dataclass
class ControllerConfig:
    """Controller weights, constraint levels and class-K slopes.

    ``impedance`` holds one value per unordered pair in stacking order, and
    ``power_scale`` is 1 / (N^2 sigma^2).
    """

    Ac: np.ndarray
    Bc: np.ndarray
    Wz: np.ndarray
    Wmu: np.ndarray
    r_min: float
    s_max: float
    q_max: float
    impedance: np.ndarray
    power_scale: float
    rho: float = 20.0
    gamma: float = 1e40
    alpha0: float = 0.5
    alpha1: float = 1.0
    alphav: float = 1.0
    alpha: float = 0.03
    psi_params: PsiParams = field(default_factory=PsiParams)

    def __post_init__(self):
        self.Ac = np.atleast_2d(np.asarray(self.Ac, dtype=float))
        self.Bc = np.atleast_2d(np.asarray(self.Bc, dtype=float))
        self.impedance = np.asarray(self.impedance, dtype=float).ravel()
        if abs(np.linalg.det(self.Bc)) == 0:
            raise ValueError("Bc must be invertible")
        for name in ("rho", "gamma", "alpha0", "alpha1", "alphav", "alpha", "r_min", "s_max", "q_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_weights(cls, n: int, *, wz_pos: float, wz_vel: float, wz_zeta: float, wmu: float,
                     ac_scale: float = -0.1, **kwargs) -> "ControllerConfig":
        """Block-diagonal weights and Ac = ac_scale * I, Bc = I."""
        ell = n * (n - 1) // 2
        m = 3 * (n - 1)
        Wz = np.diag(np.r_[np.full(m, wz_pos), np.full(m, wz_vel), np.full(3 * ell, wz_zeta)])
        return cls(Ac=ac_scale * np.eye(3 * ell), Bc=np.eye(3 * ell), Wz=Wz,
                   Wmu=wmu * np.eye(3 * ell), **kwargs)


@dataclass(frozen=True)
class SystemMatrices:
    n: int
    ell: int
    scale: float  # c0 / (2 m)
    A: np.ndarray
    B: np.ndarray
    B0: np.ndarray
    T: np.ndarray
    F: np.ndarray
    G: np.ndarray
    G0: np.ndarray
    Ft: np.ndarray
    Gt: np.ndarray
    incidence: np.ndarray  # (ell, n): +1 at i, -1 at j for pair (i, j)
    zeta_d_map: np.ndarray  # maps stacked d'' to zeta_d
    Bc_inv: np.ndarray


@dataclass
class BarrierEvaluation:
    h: float
    grad_x: np.ndarray
    grad_zeta: np.ndarray
    args: dict
    weights: np.ndarray
    extra: dict


@dataclass(frozen=True)
class ControlDecision:
    mu: np.ndarray
    mu_d: np.ndarray
    lam: float
    eta: float
    b_at_mu_d: float
    h: float


def build_matrices(n: int, mass: float, config: ControllerConfig, c0: float = C0) -> SystemMatrices:
    if n < 2:
        raise ValueError("need at least two satellites")
    ell = n * (n - 1) // 2
    I3 = np.eye(3)
    scale = c0 / (2.0 * mass)
    E = np.zeros((ell, n))
    for k, (i, j) in enumerate(pair_list(n)):
        E[k, i] = 1.0
        E[k, j] = -1.0
    B0 = scale * E.T
    Z = np.zeros((n, n))
    A = np.kron(np.block([[Z, np.eye(n)], [Z, Z]]), I3)
    B = np.vstack([np.zeros((3 * n, 3 * ell)), np.kron(B0, I3)])
    diff = np.hstack([np.ones((n - 1, 1)), -np.eye(n - 1)])
    Zr = np.zeros((n - 1, n))
    T = np.kron(np.block([[diff, Zr], [Zr, diff]]), I3)
    Zm = np.zeros((n - 1, n - 1))
    F = np.kron(np.block([[Zm, np.eye(n - 1)], [Zm, Zm]]), I3)
    G0 = diff @ B0
    G = np.vstack([np.zeros((3 * (n - 1), 3 * ell)), np.kron(G0, I3)])
    Ac, Bc = config.Ac, config.Bc
    if Ac.shape != (3 * ell, 3 * ell) or Bc.shape != (3 * ell, 3 * ell):
        raise EMFFError("bad_formation_spec", "Ac/Bc must be 3l x 3l")
    Ft = np.block([[F, G], [np.zeros((3 * ell, 6 * (n - 1))), Ac]])
    Gt = np.vstack([np.zeros((6 * (n - 1), 3 * ell)), Bc])
    zeta_d_map = np.kron(G0.T @ np.linalg.inv(G0 @ G0.T), I3)
    return SystemMatrices(n, ell, scale, A, B, B0, T, F, G, G0, Ft, Gt, E, zeta_d_map, np.linalg.inv(Bc))


def design_lqr(mats: SystemMatrices, config: ControllerConfig) -> CareSolution:
    return solve_care(mats.Ft, mats.Gt, config.Wz, config.Wmu)


def mu_desired(x, zeta, d, d_dot, d_ddot, care: CareSolution, mats: SystemMatrices,
               config: ControllerConfig, d_dddot=None) -> np.ndarray:
    """LQR tracking law plus feedforward that keeps zeta on its desired trajectory.

    ``d`` and its derivatives stack the desired r_{0j}, j = 1..n-1.
    ``d_dddot`` (third derivative) feeds the zeta_d rate; zero when omitted.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    m = 3 * (mats.n - 1)
    d, d_dot, d_ddot = (np.asarray(a, dtype=float).ravel() for a in (d, d_dot, d_ddot))
    if x.size != 6 * mats.n or zeta.size != 3 * mats.ell or not (d.size == d_dot.size == d_ddot.size == m):
        raise EMFFError("bad_formation_spec", "state or formation vectors have the wrong size")
    zeta_d = mats.zeta_d_map @ d_ddot
    zeta_d_dot = np.zeros_like(zeta_d) if d_dddot is None else mats.zeta_d_map @ np.asarray(d_dddot, dtype=float).ravel()
    err = np.concatenate([mats.T @ x - np.concatenate([d, d_dot]), zeta - zeta_d])
    return care.gain @ err - mats.Bc_inv @ (zeta_d_dot - config.Ac @ zeta_d)


def soft_min(values, rho: float) -> float:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EMFFError("empty_softmin", "soft minimum of no values")
    lo = values.min()
    return float(lo - np.log(np.sum(np.exp(-rho * (values - lo)))) / rho)


def soft_min_weights(values, rho: float) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    e = np.exp(-rho * (values - values.min()))
    w = e / e.sum()
    w[w < 1e-300] = 0.0
    return w


def _pair_quantities(x, zeta, mats: SystemMatrices):
    n = mats.n
    r = x[: 3 * n].reshape(n, 3)
    v = x[3 * n :].reshape(n, 3)
    Z = np.asarray(zeta, dtype=float).reshape(mats.ell, 3)
    E = mats.incidence
    rij = E @ r
    vij = E @ v
    wij = E @ (mats.B0 @ Z)  # relative acceleration per pair
    return rij, vij, wij, Z


def _names(n: int):
    pairs = [f"{i + 1}_{j + 1}" for i, j in pair_list(n)]
    return ([f"R2_{p}" for p in pairs] + [f"V1_{p}" for p in pairs] + [f"Q_{i + 1}" for i in range(n)])


def cbf_values(x, zeta, config: ControllerConfig, mats: SystemMatrices) -> dict:
    """All candidate barriers; each array is indexed by pair (stacking order) or satellite."""
    x = np.asarray(x, dtype=float)
    rij, vij, wij, Z = _pair_quantities(x, zeta, mats)
    a0, a1, av = config.alpha0, config.alpha1, config.alphav
    rr = np.einsum("ij,ij->i", rij, rij)
    rv = np.einsum("ij,ij->i", rij, vij)
    vv = np.einsum("ij,ij->i", vij, vij)
    rw = np.einsum("ij,ij->i", rij, wij)
    vw = np.einsum("ij,ij->i", vij, wij)
    R = 0.5 * (rr - config.r_min**2)
    R1 = rv + a0 * R
    R2 = vv + rw + a0 * rv + a1 * R1
    V = 0.5 * (config.s_max**2 - vv)
    V1 = -vw + av * V
    psis = np.array([psi(rij[k], Z[k], config.psi_params) for k in range(mats.ell)])
    load = np.abs(mats.incidence).T @ (config.impedance * psis)
    Q = config.q_max - config.power_scale * load
    return {"R": R, "R1": R1, "R2": R2, "V": V, "V1": V1, "Q": Q, "psi": psis}


def barrier_h(x, zeta, config: ControllerConfig, mats: SystemMatrices) -> BarrierEvaluation:
    """Composite soft-minimum barrier over all R_ij,2, V_ij,1 and Q_i with its analytic gradient."""
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n, ell = mats.n, mats.ell
    rij, vij, wij, Z = _pair_quantities(x, zeta, mats)
    a0, a1, av = config.alpha0, config.alpha1, config.alphav
    E = mats.incidence

    rr = np.einsum("ij,ij->i", rij, rij)
    rv = np.einsum("ij,ij->i", rij, vij)
    vv = np.einsum("ij,ij->i", vij, vij)
    R = 0.5 * (rr - config.r_min**2)
    R1 = rv + a0 * R
    R2 = vv + np.einsum("ij,ij->i", rij, wij) + a0 * rv + a1 * R1
    V = 0.5 * (config.s_max**2 - vv)
    V1 = -np.einsum("ij,ij->i", vij, wij) + av * V

    psis = np.empty(ell)
    dpsi_dr = np.empty((ell, 3))
    dpsi_dz = np.empty((ell, 3))
    for k in range(ell):
        psis[k], dpsi_dr[k], dpsi_dz[k] = psi_grad(rij[k], Z[k], config.psi_params)
    absE = np.abs(E)
    Q = config.q_max - config.power_scale * (absE.T @ (config.impedance * psis))

    values = np.concatenate([R2, V1, Q])
    if not np.all(np.isfinite(values)):
        bad = _names(n)[int(np.flatnonzero(~np.isfinite(values))[0])]
        raise EMFFError("barrier_nonfinite", f"argument {bad} is not finite")
    h = soft_min(values, config.rho)
    w = soft_min_weights(values, config.rho)
    wR, wV, wQ = w[:ell, None], w[ell : 2 * ell, None], w[2 * ell :]

    g_r = wR * (wij + a0 * vij + a1 * (vij + a0 * rij))
    g_v = wR * (2.0 * vij + (a0 + a1) * rij) - wV * (wij + av * vij)
    g_w = wR * rij - wV * vij
    coef = -config.power_scale * config.impedance * (absE @ wQ)
    g_r = g_r + coef[:, None] * dpsi_dr
    # wij = E B0 Z, so d/dZ of sum(g_w * wij) = B0^T E^T g_w
    g_z = coef[:, None] * dpsi_dz + mats.B0.T @ (E.T @ g_w)
    grad_x = np.concatenate([(E.T @ g_r).ravel(), (E.T @ g_v).ravel()])

    names = _names(n)
    return BarrierEvaluation(
        h=h, grad_x=grad_x, grad_zeta=g_z.ravel(),
        args=dict(zip(names, values)), weights=w,
        extra={"R": R, "R1": R1, "V": V, "psi": psis, "values": values},
    )


def drift(x, zeta, mats: SystemMatrices) -> np.ndarray:
    """Ax + B zeta for the averaged linear model."""
    return mats.A @ x + mats.B @ zeta


def constraint_b(x, zeta, mu_hat, eta_hat, ev: BarrierEvaluation, config: ControllerConfig,
                 mats: SystemMatrices) -> float:
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    return float(
        ev.grad_x @ drift(x, zeta, mats)
        + ev.grad_zeta @ (config.Ac @ zeta + config.Bc @ np.asarray(mu_hat, dtype=float))
        + config.alpha * ev.h + eta_hat * ev.h
    )


def optimal_control(x, zeta, mu_d, config: ControllerConfig, mats: SystemMatrices,
                    ev: BarrierEvaluation | None = None) -> ControlDecision:
    """Closed-form minimizer of 0.5|mu - mu_d|^2 + 0.5 gamma eta^2 subject to b >= 0."""
    if ev is None:
        ev = barrier_h(x, zeta, config, mats)
    mu_d = np.asarray(mu_d, dtype=float)
    b0 = constraint_b(x, zeta, mu_d, 0.0, ev, config, mats)
    direction = config.Bc.T @ ev.grad_zeta
    denom = direction @ direction + ev.h**2 / config.gamma
    if b0 >= 0:
        return ControlDecision(mu_d.copy(), mu_d, 0.0, 0.0, b0, ev.h)
    if denom < 1e-300:
        raise EMFFError("degenerate_filter", "dh/dzeta vanishes on the barrier boundary")
    lam = -b0 / denom
    return ControlDecision(mu_d + lam * direction, mu_d, float(lam), float(ev.h * lam / config.gamma), b0, ev.h)


def filter_cost(mu_hat, eta_hat, mu_d, gamma: float) -> float:
    diff = np.asarray(mu_hat) - np.asarray(mu_d)
    return float(0.5 * diff @ diff + 0.5 * gamma * eta_hat**2)
