"""Point-dipole interaction forces, sinusoidal moments and the multi-satellite plant.

Satellites are indexed from 0 in code. State vectors are stacked as
``x = (r_0, ..., r_{n-1}, v_0, ..., v_{n-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EMFFError
from .numerics import quadrature_average

MU0 = 4e-7 * np.pi
C0 = 3e-7  # 3 * mu0 / (4 pi)
COINCIDENT_DISTANCE = 1e-6


@dataclass(frozen=True)
class SatelliteParams:
    mass: float = 15.0
    turns: int = 400
    coil_area: float = 0.25**2 * np.pi
    coil_resistance: float = 3.2735
    coil_inductance: float = 0.2
    power_cap: float = 1e4

    def __post_init__(self):
        for name in ("mass", "turns", "coil_area", "coil_resistance", "coil_inductance", "power_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def power_scale(self) -> float:
        """1 / (N^2 sigma^2), the amplitude-to-power factor without impedance."""
        return 1.0 / (self.turns**2 * self.coil_area**2)

    def impedance(self, omega: float) -> float:
        return float(np.hypot(self.coil_resistance, omega * self.coil_inductance))


@dataclass(frozen=True)
class Environment:
    kind: str = "deep_space"
    mu_g: float = 6.67e-11
    m_earth: float = 5.9e24

    def __post_init__(self):
        if self.kind not in ("deep_space", "leo"):
            raise ValueError(f"unknown environment kind {self.kind!r}")


@dataclass
class InertialState:
    t: float
    r: np.ndarray  # (n, 3)
    v: np.ndarray  # (n, 3)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(-1, 3)
        self.v = np.asarray(self.v, dtype=float).reshape(-1, 3)
        if self.r.shape != self.v.shape or self.r.shape[0] < 2:
            raise ValueError("need matching position/velocity blocks for n >= 2 satellites")

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.r.ravel(), self.v.ravel()])

    @classmethod
    def from_x(cls, t: float, x) -> "InertialState":
        x = np.asarray(x, dtype=float)
        n = x.size // 6
        return cls(t, x[: 3 * n], x[3 * n :])


@dataclass
class AmplitudeSchedule:
    """Amplitudes held over the k-th period ``[kT, kT + T)``.

    ``p`` maps ordered pairs (i, j) to the amplitude of satellite i's
    sinusoid at the pair frequency; ``omega`` maps unordered pairs (i < j)
    to rad/s.
    """

    period: float
    k: int
    p: dict
    omega: dict = field(default_factory=dict)

    def frequency(self, i: int, j: int) -> float:
        return self.omega[(i, j) if i < j else (j, i)]


def pair_list(n: int) -> list[tuple[int, int]]:
    """Unordered pairs (i, j), i < j, in stacking order (0,1), (0,2), ..., (n-2, n-1)."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def dipole_force_shape(r, u_i, u_j) -> np.ndarray:
    """Direction-dependent factor of the dipole-dipole force on i from j."""
    r = np.asarray(r, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    u_j = np.asarray(u_j, dtype=float)
    d = np.sqrt(r @ r)
    if d == 0:
        raise EMFFError("coincident_satellites", "zero separation")
    rh = r / d
    ui_r = u_i @ rh
    uj_r = u_j @ rh
    return uj_r * u_i + ui_r * u_j + (u_i @ u_j - 5.0 * ui_r * uj_r) * rh


def intersatellite_force(r_ij, u_i, u_j) -> np.ndarray:
    r_ij = np.asarray(r_ij, dtype=float)
    d2 = r_ij @ r_ij
    return C0 / (d2 * d2) * dipole_force_shape(r_ij, u_i, u_j)


def moment_waveform(sched: AmplitudeSchedule, i: int, t: float, n: int | None = None) -> np.ndarray:
    """Magnetic moment of satellite ``i`` at time ``t``."""
    start = sched.k * sched.period
    slack = 1e-9 * max(1.0, abs(start))
    if t < start - slack or t > start + sched.period + slack:
        raise ValueError(f"t={t} outside period {sched.k}")
    if n is None:
        n = 1 + max(max(pair) for pair in sched.omega)
    u = np.zeros(3)
    for j in range(n):
        if j == i:
            continue
        try:
            amp = sched.p[(i, j)]
        except KeyError:
            raise EMFFError("schedule_incomplete", f"no amplitude for pair ({i}, {j})") from None
        u = u + np.asarray(amp, dtype=float) * np.sin(sched.frequency(i, j) * t)
    return u


def gravity(env: Environment, params: SatelliteParams, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if env.kind == "deep_space":
        return np.zeros(3)
    d = np.sqrt(r @ r)
    if d == 0:
        raise EMFFError("singular_gravity", "satellite at the Earth's center")
    return -env.mu_g * params.mass * env.m_earth / d**3 * r


def _check_separations(r: np.ndarray) -> None:
    n = r.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(r[i] - r[j]) < COINCIDENT_DISTANCE:
                raise EMFFError("coincident_satellites", f"pair ({i}, {j}) closer than 1e-6 m", pair=(i, j))


def _gravity_accel(env: Environment, r: np.ndarray) -> np.ndarray:
    if env.kind == "deep_space":
        return np.zeros_like(r)
    d = np.linalg.norm(r, axis=1)
    if np.any(d == 0):
        raise EMFFError("singular_gravity", "satellite at the Earth's center")
    return -env.mu_g * env.m_earth * r / d[:, None] ** 3


def full_rhs(state: InertialState, sched: AmplitudeSchedule, env: Environment, params: SatelliteParams) -> np.ndarray:
    """Time derivative of the stacked state under the sinusoidal moments."""
    r, v, n = state.r, state.v, state.n
    _check_separations(r)
    u = np.array([moment_waveform(sched, i, state.t, n) for i in range(n)])
    acc = _gravity_accel(env, r)
    for i in range(n):
        for j in range(i + 1, n):
            F = intersatellite_force(r[i] - r[j], u[i], u[j])
            acc[i] += F / params.mass
            acc[j] -= F / params.mass
    return np.concatenate([v.ravel(), acc.ravel()])


def averaged_rhs(state: InertialState, p: dict, params: SatelliteParams, env: Environment | None = None) -> np.ndarray:
    """Time-averaged model: each pair contributes (c0 / 2m) |r_ij|^-4 f(r_ij, p_ij, p_ji).

    Gravity is added only when a LEO ``env`` is passed.
    """
    r, v, n = state.r, state.v, state.n
    _check_separations(r)
    acc = np.zeros_like(r) if env is None else _gravity_accel(env, r)
    scale = C0 / (2.0 * params.mass)
    for i in range(n):
        for j in range(i + 1, n):
            rij = r[i] - r[j]
            d2 = rij @ rij
            a = scale / (d2 * d2) * dipole_force_shape(rij, p[(i, j)], p[(j, i)])
            acc[i] += a
            acc[j] -= a
    return np.concatenate([v.ravel(), acc.ravel()])


def pair_average_force_check(r, p_ij, p_ji, omega: float, T: float, k: int = 0,
                             omega_j: float | None = None, panels: int = 64):
    """Period average of the shape under sinusoidal moments vs. half the amplitude shape.

    ``omega_j`` lets the second moment run at a different frequency; the
    right-hand side is then zero.
    """
    omega_j = omega if omega_j is None else omega_j
    for w in (omega, omega_j):
        cycles = w * T / (2 * np.pi)
        if abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles):
            raise EMFFError("not_common_period", f"T={T} is not a multiple of 2 pi / {w}")
    p_ij = np.asarray(p_ij, dtype=float)
    p_ji = np.asarray(p_ji, dtype=float)
    lhs = quadrature_average(
        lambda t: dipole_force_shape(r, p_ij * np.sin(omega * t), p_ji * np.sin(omega_j * t)),
        k * T, k * T + T, panels,
    )
    rhs = 0.5 * dipole_force_shape(r, p_ij, p_ji) if omega_j == omega else np.zeros(3)
    return lhs, rhs


def total_momentum(state: InertialState, params: SatelliteParams) -> np.ndarray:
    return params.mass * state.v.sum(axis=0)
