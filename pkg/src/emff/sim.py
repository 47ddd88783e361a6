"""Scenario assembly and closed-loop simulation in the averaged and full (sinusoidal) models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import PsiParams, allocate_all
from .controller import (
    ControllerConfig, SystemMatrices, barrier_h, build_matrices, cbf_values, design_lqr,
    mu_desired, optimal_control,
)
from .dipole import (
    AmplitudeSchedule, Environment, InertialState, SatelliteParams, averaged_rhs, full_rhs, pair_list,
)
from .errors import EMFFError
from .numerics import CareSolution, cross3, rk4_step


@dataclass
class FormationSegment:
    start: float
    d: np.ndarray  # (n-1, 3): desired r_{0j}, j = 1..n-1

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float).reshape(-1, 3)


@dataclass
class Scenario:
    name: str
    params: SatelliteParams
    env: Environment
    r0: np.ndarray
    v0: np.ndarray
    formation: list
    frame: str = "inertial"  # or "com"
    r_min: float = 1.0
    s_max: float = 0.025
    controller: dict = field(default_factory=dict)
    horizon: float = 100.0
    mode: str = "averaged"
    period: float = 0.1
    substeps: int | None = None
    zeta0: np.ndarray | None = None
    safety_filter: bool = True

    def __post_init__(self):
        self.r0 = np.asarray(self.r0, dtype=float).reshape(-1, 3)
        self.v0 = np.asarray(self.v0, dtype=float).reshape(-1, 3)
        if self.r0.shape != self.v0.shape or self.n < 2:
            raise ValueError("initial positions and velocities must describe n >= 2 satellites")
        if self.zeta0 is None:
            self.zeta0 = np.zeros(3 * self.ell)
        self.zeta0 = np.asarray(self.zeta0, dtype=float).ravel()
        if self.zeta0.size != 3 * self.ell or not np.all(np.isfinite(self.zeta0)):
            raise ValueError("zeta0 must be a finite 3l-vector")
        if self.frame not in ("inertial", "com"):
            raise ValueError(f"unknown formation frame {self.frame!r}")
        if self.mode not in ("averaged", "full"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.formation:
            raise ValueError("formation schedule is empty")
        self.formation = sorted(self.formation, key=lambda s: s.start)
        for seg in self.formation:
            if seg.d.shape != (self.n - 1, 3):
                raise ValueError("each formation segment needs n-1 desired relative positions")

    @property
    def n(self) -> int:
        return self.r0.shape[0]

    @property
    def ell(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def x0(self) -> np.ndarray:
        return np.concatenate([self.r0.ravel(), self.v0.ravel()])

    def steps_per_period(self) -> int:
        if self.substeps is not None:
            return int(self.substeps)
        return 10 if self.mode == "averaged" else 200

    def controller_config(self) -> ControllerConfig:
        c = dict(self.controller)
        omega, _ = frequency_map(self.n)
        impedance = [self.params.impedance(omega[p]) for p in pair_list(self.n)]
        psi_params = PsiParams(c.pop("eps1", 1e-3), c.pop("eps2", 1e-6))
        return ControllerConfig.from_weights(
            self.n, r_min=self.r_min, s_max=self.s_max, q_max=self.params.power_cap,
            impedance=impedance, power_scale=self.params.power_scale, psi_params=psi_params, **c,
        )


@dataclass(frozen=True)
class FormationFrame:
    r_com: np.ndarray
    R_com: np.ndarray  # columns: i_com, j_com, k_com resolved in the inertial frame
    omega_orb: float
    omega_vec: np.ndarray


def frequency_map(n: int, base: float = 20 * np.pi) -> tuple[dict, float]:
    """Pair frequencies 20 pi nu_ij and the common period 0.1 s.

    nu_ij = (i-1)(2n-i)/2 + j - i in 1-based indices, i.e. the pair's stacking
    position; keys here are 0-based (i, j), i < j.
    """
    if n < 2:
        raise ValueError("need at least two satellites")
    omega = {}
    for i, j in pair_list(n):
        i1, j1 = i + 1, j + 1
        nu = (i1 - 1) * (2 * n - i1) // 2 + j1 - i1
        omega[(i, j)] = base * nu
    T = 2 * np.pi / base
    for w in omega.values():
        cycles = w * T / (2 * np.pi)
        assert abs(cycles - round(cycles)) < 1e-9
    return omega, T


def formation_frame(x) -> FormationFrame:
    x = np.asarray(x, dtype=float)
    n = x.size // 6
    r = x[: 3 * n].reshape(n, 3)
    v = x[3 * n :].reshape(n, 3)
    r_com = r.mean(axis=0)
    v_com = v.mean(axis=0)
    dist = np.linalg.norm(r_com)
    horiz = np.hypot(r_com[0], r_com[1])
    if dist == 0 or horiz <= 1e-12 * dist:
        raise EMFFError("degenerate_com", "formation center at the origin or on the k axis")
    i_com = r_com / dist
    j_com = np.array([-i_com[1], i_com[0], 0.0]) / np.hypot(i_com[0], i_com[1])
    k_com = cross3(i_com, j_com)
    omega_vec = cross3(r_com, v_com) / dist**2
    return FormationFrame(r_com, np.column_stack([i_com, j_com, k_com]),
                          float(np.linalg.norm(omega_vec)), omega_vec)


def active_segment(formation: list, t: float) -> FormationSegment:
    if t < formation[0].start:
        raise EMFFError("schedule_gap", f"no formation segment covers t={t}")
    seg = formation[0]
    for s in formation:
        if s.start <= t:
            seg = s
    return seg


def desired_signals(formation: list, frame: FormationFrame | None, t: float):
    """Stacked desired d, d', d'', d''' over pairs (0, j).

    In the formation-center frame the targets rotate rigidly with the
    instantaneous orbital rate vector; otherwise they are constant.
    """
    seg = active_segment(formation, t)
    if frame is None:
        d = seg.d.copy()
        z = np.zeros_like(d)
        return d.ravel(), z.ravel(), z.ravel(), z.ravel()
    w = frame.omega_vec
    d = seg.d @ frame.R_com.T
    d1 = cross3(w, d)
    d2 = cross3(w, d1)
    d3 = cross3(w, d2)
    return d.ravel(), d1.ravel(), d2.ravel(), d3.ravel()


def apparent_power(amplitudes: dict, n: int, impedance, power_scale: float) -> np.ndarray:
    """Per-satellite apparent power from ordered-pair amplitudes."""
    impedance = np.asarray(impedance, dtype=float).ravel()
    q = np.zeros(n)
    for k, (i, j) in enumerate(pair_list(n)):
        for a, b in ((i, j), (j, i)):
            p = np.asarray(amplitudes[(a, b)], dtype=float)
            q[a] += impedance[k] * (p @ p)
    return power_scale * q


@dataclass
class TrajectoryLog:
    n: int
    t: np.ndarray
    x: np.ndarray
    zeta: np.ndarray
    mu: np.ndarray
    mu_d: np.ndarray
    h: np.ndarray
    lam: np.ndarray
    args: np.ndarray
    arg_names: list
    R: np.ndarray
    R1: np.ndarray
    V: np.ndarray
    dist: np.ndarray
    speed: np.ndarray
    q: np.ndarray
    p: np.ndarray  # (K, n(n-1), 3) in ordered_pairs order
    d: np.ndarray
    ordered_pairs: list

    @property
    def pairs(self) -> list:
        return pair_list(self.n)


@dataclass
class ConstraintReport:
    min_distance: float
    max_speed: float
    max_power: float
    min_h: float
    lambda_intervals: list
    terminal_formation_error: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


class Simulation:
    """Closed-loop co-integration of the plant and the controller state zeta."""

    def __init__(self, scenario: Scenario, care: CareSolution | None = None):
        self.scenario = sc = scenario
        self.config = sc.controller_config()
        self.mats: SystemMatrices = build_matrices(sc.n, sc.params.mass, self.config)
        self.care = care if care is not None else design_lqr(self.mats, self.config)
        self.omega, _ = frequency_map(sc.n)
        self.n = sc.n
        self.ordered = [(i, j) for i in range(sc.n) for j in range(sc.n) if i != j]
        self.max_refine = 24
        self.refine_budget = 2048  # extra RK4 steps allowed per nominal step
        self.h_tol = 1e-9
        self._spent = 0

    def signals(self, t: float, x: np.ndarray):
        frame = formation_frame(x) if self.scenario.frame == "com" else None
        return desired_signals(self.scenario.formation, frame, t)

    def control(self, t: float, x: np.ndarray, zeta: np.ndarray):
        d, d1, d2, d3 = self.signals(t, x)
        mu_d = mu_desired(x, zeta, d, d1, d2, self.care, self.mats, self.config, d_dddot=d3)
        ev = barrier_h(x, zeta, self.config, self.mats)
        if not self.scenario.safety_filter:
            return mu_d, mu_d, 0.0, ev, d
        dec = optimal_control(x, zeta, mu_d, self.config, self.mats, ev)
        return dec.mu, mu_d, dec.lam, ev, d

    def zeta_rate(self, t, x, zeta):
        mu = self.control(t, x, zeta)[0]
        return self.config.Ac @ zeta + self.config.Bc @ mu

    def averaged_plant(self, t, x, zeta):
        state = InertialState.from_x(t, x)
        p = allocate_all(state.r, zeta)
        return averaged_rhs(state, p, self.scenario.params, self.scenario.env)

    def check_initial(self, x, zeta):
        vals = cbf_values(x, zeta, self.config, self.mats)
        bad = [k for k in ("R", "R1", "R2", "V", "V1", "Q") if np.any(vals[k] < 0)]
        if bad:
            raise EMFFError("unsafe_initial_state", "violated barriers: " + ", ".join(bad), violated=bad)

    def run(self, horizon: float | None = None, mode: str | None = None) -> TrajectoryLog:
        sc = self.scenario
        horizon = sc.horizon if horizon is None else horizon
        mode = sc.mode if mode is None else mode
        n, ell = sc.n, sc.ell
        T = sc.period
        x = sc.x0.copy()
        zeta = sc.zeta0.copy()
        self.check_initial(x, zeta)
        nper = int(round(horizon / T))
        m = int(sc.substeps) if sc.substeps is not None else (10 if mode == "averaged" else 200)
        h = T / m
        rows = []
        for k in range(nper + 1):
            t0 = k * T
            p = allocate_all(x[: 3 * n].reshape(n, 3), zeta)
            rows.append(self._sample(t0, x, zeta, p))
            if k == nper:
                break
            if mode == "averaged":
                def rhs(t, y):
                    xx, zz = y[: 6 * n], y[6 * n :]
                    return np.concatenate([self.averaged_plant(t, xx, zz), self.zeta_rate(t, xx, zz)])
            else:
                sched = AmplitudeSchedule(T, k, p, self.omega)

                def rhs(t, y, sched=sched):
                    xx, zz = y[: 6 * n], y[6 * n :]
                    dx = full_rhs(InertialState.from_x(t, xx), sched, sc.env, sc.params)
                    return np.concatenate([dx, self.zeta_rate(t, xx, zz)])
            y = np.concatenate([x, zeta])
            for s in range(m):
                y = self._guarded_step(rhs, t0 + s * h, y, h)
            x, zeta = y[: 6 * n], y[6 * n :]
        return self._assemble(rows)

    def _h(self, y):
        n = self.n
        return barrier_h(y[: 6 * n], y[6 * n :], self.config, self.mats).h

    def _guarded_step(self, rhs, t, y, h, depth=0, h_start=None):
        # Bisect steps on which the composite barrier would drop below zero;
        # the soft minimum can hand dominance to a fast argument within a
        # fraction of one nominal step. When several arguments are active at
        # once the filtered loop becomes extremely stiff and bisection cannot
        # keep up; the budget turns that into an error instead of a hang.
        if depth == 0:
            self._spent = 0
        y1 = rk4_step(rhs, t, y, h)
        self._spent += 1
        if not self.scenario.safety_filter or depth >= self.max_refine:
            return y1
        if h_start is None:
            h_start = self._h(y)
        h_end = self._h(y1)
        if h_end >= min(0.0, h_start) - self.h_tol:
            return y1
        if self._spent > self.refine_budget:
            raise EMFFError("step_refinement_exhausted",
                            f"barrier guard needed more than {self.refine_budget} substeps near t={t:.6f}",
                            t=t, h=h_end)
        ym = self._guarded_step(rhs, t, y, 0.5 * h, depth + 1, h_start)
        return self._guarded_step(rhs, t + 0.5 * h, ym, 0.5 * h, depth + 1)

    def _sample(self, t, x, zeta, p):
        mu, mu_d, lam, ev, d = self.control(t, x, zeta)
        n = self.n
        r = x[: 3 * n].reshape(n, 3)
        v = x[3 * n :].reshape(n, 3)
        E = self.mats.incidence
        q = apparent_power(p, n, self.config.impedance, self.config.power_scale)
        return dict(
            t=t, x=x.copy(), zeta=zeta.copy(), mu=mu, mu_d=mu_d, h=ev.h, lam=lam,
            args=ev.extra["values"], R=ev.extra["R"], R1=ev.extra["R1"], V=ev.extra["V"],
            dist=np.linalg.norm(E @ r, axis=1), speed=np.linalg.norm(E @ v, axis=1), q=q,
            p=np.array([p[o] for o in self.ordered]), d=d, names=list(ev.args),
        )

    def _assemble(self, rows) -> TrajectoryLog:
        def stack(key):
            return np.array([row[key] for row in rows])

        return TrajectoryLog(
            n=self.n, t=stack("t"), x=stack("x"), zeta=stack("zeta"), mu=stack("mu"), mu_d=stack("mu_d"),
            h=stack("h"), lam=stack("lam"), args=stack("args"), arg_names=rows[0]["names"],
            R=stack("R"), R1=stack("R1"), V=stack("V"), dist=stack("dist"), speed=stack("speed"),
            q=stack("q"), p=stack("p"), d=stack("d"), ordered_pairs=self.ordered,
        )


def run_averaged(scenario: Scenario, horizon: float | None = None) -> TrajectoryLog:
    return Simulation(scenario).run(horizon, "averaged")


def run_full(scenario: Scenario, horizon: float | None = None) -> TrajectoryLog:
    return Simulation(scenario).run(horizon, "full")


def _intervals(t: np.ndarray, mask: np.ndarray) -> list:
    out = []
    start = None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = t[k]
        if not flag and start is not None:
            out.append((float(start), float(t[k - 1])))
            start = None
    if start is not None:
        out.append((float(start), float(t[-1])))
    return out


def monitor(log: TrajectoryLog, r_min: float, s_max: float, q_max: float, rtol: float = 1e-9) -> ConstraintReport:
    """Summarize a run and list every sample that breaks a distance, speed or power limit."""
    if log.t.size == 0:
        raise ValueError("empty log")
    pairs = log.pairs
    names = [f"{i + 1}_{j + 1}" for i, j in pairs]
    violations = []
    for k, t in enumerate(log.t):
        for c, name in enumerate(names):
            if log.dist[k, c] < r_min * (1 - rtol):
                violations.append((float(t), "distance", name, float(log.dist[k, c])))
            if log.speed[k, c] > s_max * (1 + rtol):
                violations.append((float(t), "speed", name, float(log.speed[k, c])))
        for i in range(log.n):
            if log.q[k, i] > q_max * (1 + rtol):
                violations.append((float(t), "power", str(i + 1), float(log.q[k, i])))

    n = log.n
    r = log.x[-1, : 3 * n].reshape(n, 3)
    d0 = np.vstack([np.zeros(3), log.d[-1].reshape(n - 1, 3)])  # desired r_0 - r_j with r_00 = 0
    err = max(np.linalg.norm((r[i] - r[j]) - (d0[j] - d0[i])) for i, j in pairs)
    return ConstraintReport(
        min_distance=float(log.dist.min()), max_speed=float(log.speed.max()), max_power=float(log.q.max()),
        min_h=float(log.h.min()), lambda_intervals=_intervals(log.t, log.lam > 0),
        terminal_formation_error=float(err), violations=violations,
    )
