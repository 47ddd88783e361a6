"""Randomized property sweeps behind ``emff verify``.

Each sweep returns a :class:`SweepResult` holding the number of cases, the
failing case indices and the worst residual seen. Cases are generated from a
single ``numpy.random.Generator`` so a seed fully determines the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocation import _sgn, amplitude_pair, psi
from .controller import (
    ControllerConfig, barrier_h, build_matrices, constraint_b, drift, filter_cost, optimal_control,
)
from .dipole import dipole_force_shape, pair_average_force_check
from .numerics import care_residual, finite_difference_gradient, solve_care
from .sim import Scenario, frequency_map

SUITES = ("allocation", "averaging", "care", "gradient", "kkt")


@dataclass
class SweepResult:
    suite: str
    cases: int
    tolerance: float
    worst: float
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = "".join(f" {k}={v}" for k, v in self.notes.items())
        return (f"{self.suite}: {status} {self.cases - len(self.failures)}/{self.cases} "
                f"worst={self.worst:.3e} tol={self.tolerance:.0e}{extra}")


# -- allocation ---------------------------------------------------------------

ALLOCATION_CASES = ("positive", "negative", "orthogonal", "collinear")


def allocation_sample(rng: np.random.Generator, case: str) -> tuple[np.ndarray, np.ndarray]:
    """A random (r, f_*) in one of the four sign/geometry cases."""
    r = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 1)
    fmag = 10.0 ** rng.uniform(-3, 3)
    if case == "collinear":
        return r, rng.choice([-1.0, 1.0]) * fmag * r / np.linalg.norm(r)
    if case == "orthogonal":
        # (a, b, 0).(-b, a, c) is exactly zero in floating point; a shared
        # permutation, sign flip and power-of-two scale keep it exact
        a, b, c = rng.normal(size=3)
        perm = rng.permutation(3)
        flip = rng.choice([-1.0, 1.0], size=3)
        scale = 2.0 ** int(rng.integers(-10, 10))
        return (np.array([a, b, 0.0]) * flip)[perm], (scale * np.array([-b, a, c]) * flip)[perm]
    f = rng.normal(size=3)
    f -= (f @ r) / (r @ r) * r
    f *= fmag / np.linalg.norm(f)
    along = rng.uniform(0.05, 3.0) * fmag * r / np.linalg.norm(r)
    return r, f + along if case == "positive" else f - along


def allocation_sweep(seed: int = 1, cases: int = 10_000, tol: float = 1e-9) -> SweepResult:
    """Round trip f(r, c1, c2) = f_*, the psi bound and the norm identity."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    branches: dict[str, int] = {}
    psi_margin = np.inf
    signs: dict[str, set] = {c: set() for c in ALLOCATION_CASES}
    for k in range(cases):
        case = ALLOCATION_CASES[k % 4]
        r, f = allocation_sample(rng, case)
        res = amplitude_pair(r, f)
        branches[res.branch] = branches.get(res.branch, 0) + 1
        err = np.linalg.norm(dipole_force_shape(r, res.c1, res.c2) - f) / (1.0 + np.linalg.norm(f))
        n1, n2 = res.c1 @ res.c1, res.c2 @ res.c2
        s = _sgn(r @ f, np.linalg.norm(r) * np.linalg.norm(f))
        signs[case].add(s)
        ident = abs(n1 - (2.0 - s * s) * n2) / max(n1, 1e-300)
        bound = psi(r, f / (r @ r) ** 2)
        margin = bound - max(n1, n2)
        psi_margin = min(psi_margin, margin / max(n1, n2, 1e-300))
        worst = max(worst, err, ident)
        if err > tol or ident > tol or not margin > 0:
            failures.append(k)
    return SweepResult("allocation", cases, tol, worst, failures,
                       {"branches": ",".join(f"{b}:{c}" for b, c in sorted(branches.items())),
                        "min_psi_margin": f"{psi_margin:.3e}",
                        "signs": ";".join(f"{c}:{sorted(int(v) for v in signs[c])}" for c in ALLOCATION_CASES)})


# -- averaging ----------------------------------------------------------------

def averaging_sweep(seed: int = 1, cases: int = 200, tol: float = 1e-8, cross_tol: float = 1e-10,
                    n: int = 4) -> SweepResult:
    """Period average of the sinusoidal pair force against half the amplitude force."""
    rng = np.random.default_rng(seed)
    omega, T = frequency_map(n)
    freqs = sorted(omega.values())
    worst = 0.0
    worst_cross = 0.0
    failures = []
    for k in range(cases):
        r = rng.normal(size=3) * rng.uniform(1.0, 5.0)
        p1, p2 = rng.normal(size=3) * 100.0, rng.normal(size=3) * 100.0
        scale = np.linalg.norm(p1) * np.linalg.norm(p2)
        w = freqs[rng.integers(len(freqs))]
        period_index = int(rng.integers(0, 1000))
        lhs, rhs = pair_average_force_check(r, p1, p2, w, T, period_index)
        err = np.linalg.norm(lhs - rhs) / scale
        w2 = freqs[(freqs.index(w) + 1 + rng.integers(len(freqs) - 1)) % len(freqs)]
        lhs_x, _ = pair_average_force_check(r, p1, p2, w, T, period_index, omega_j=w2)
        cross = np.linalg.norm(lhs_x) / scale
        worst = max(worst, err)
        worst_cross = max(worst_cross, cross)
        if err > tol or cross > cross_tol:
            failures.append(k)
    return SweepResult("averaging", cases, tol, worst, failures, {"worst_cross": f"{worst_cross:.3e}"})


# -- CARE -----------------------------------------------------------------------

EXAMPLE_WEIGHTS = {
    3: dict(wz_pos=1e6, wz_vel=1.0, wz_zeta=0.01, wmu=1.0),
    4: dict(wz_pos=1e6, wz_vel=10.0, wz_zeta=1.0, wmu=50.0),
}


def cascade_problem(n: int, mass: float = 15.0):
    """Cascade matrices and weights for the deep-space example weights with n satellites."""
    ell = n * (n - 1) // 2
    config = ControllerConfig.from_weights(n, **EXAMPLE_WEIGHTS[n], r_min=1.0, s_max=0.025, q_max=1e4,
                                           impedance=np.ones(ell), power_scale=1.0)
    mats = build_matrices(n, mass, config)
    return mats.Ft, mats.Gt, config.Wz, config.Wmu


def care_check(F, G, Wz, Wmu) -> tuple[float, bool]:
    sol = solve_care(F, G, Wz, Wmu)
    rel = np.linalg.norm(care_residual(F, G, Wz, Wmu, sol.P)) / max(
        np.linalg.norm(sol.P) * np.linalg.norm(F), np.linalg.norm(Wz), 1e-300)
    hurwitz = bool(np.all(np.linalg.eigvals(F + G @ sol.gain).real < 0))
    return float(rel), hurwitz


def care_sweep(seed: int = 1, cases: int = 20, tol: float = 1e-9) -> SweepResult:
    """The two example cascades, the double integrator and random stabilizable systems."""
    rng = np.random.default_rng(seed)
    problems = [cascade_problem(3), cascade_problem(4)]
    while len(problems) < cases:
        m = 12 if len(problems) == 2 else int(rng.integers(2, 13))
        F = rng.normal(size=(m, m))
        G = rng.normal(size=(m, int(rng.integers(1, m + 1))))
        Q = rng.normal(size=(m, m))
        problems.append((F, G, Q @ Q.T + 1e-3 * np.eye(m), np.eye(G.shape[1])))
    worst = 0.0
    failures = []
    for k, prob in enumerate(problems):
        rel, hurwitz = care_check(*prob)
        worst = max(worst, rel)
        if rel > tol or not hurwitz:
            failures.append(k)
    sol = solve_care(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))
    di_err = float(np.abs(sol.P - np.array([[np.sqrt(3), 1.0], [1.0, np.sqrt(3)]])).max())
    if di_err > 1e-10:
        failures.append(len(problems))
    return SweepResult("care", len(problems) + 1, tol, worst, failures, {"double_integrator_err": f"{di_err:.3e}"})


# -- random controller states -------------------------------------------------

def random_state(rng: np.random.Generator, sc: Scenario, config: ControllerConfig):
    """A perturbed state near the scenario's initial condition with a random controller state.

    Positions move by up to half the collision radius, relative speeds stay
    inside the speed bound and zeta is scaled so the pair powers span a few
    decades around the cap.
    """
    n, ell = sc.n, sc.ell
    r = sc.r0 + rng.uniform(-0.5, 0.5, size=(n, 3)) * sc.r_min * 0.5
    v = sc.v0 + rng.normal(size=(n, 3)) * sc.s_max * 0.1
    x = np.concatenate([r.ravel(), v.ravel()])
    zeta = rng.normal(size=3 * ell)
    rij = np.array([r[i] - r[j] for i in range(n) for j in range(i + 1, n)])
    unit_load = sum(psi(rij[k], zeta[3 * k : 3 * k + 3] * 1e-6) for k in range(ell))
    target = config.q_max * 10.0 ** rng.uniform(-3, 0.3)
    per = config.power_scale * float(np.max(config.impedance)) * max(unit_load, 1e-300)
    zeta *= 1e-6 * target / per
    return x, zeta


def bundled_scenarios() -> list[Scenario]:
    from .scenario import BUNDLED, load_bundled
    return [load_bundled(name) for name in BUNDLED]


# -- gradient -----------------------------------------------------------------

def gradient_sweep(seed: int = 1, cases: int = 100, tol: float = 1e-5,
                   scenarios: list[Scenario] | None = None) -> SweepResult:
    """Analytic dh/d(x, zeta) against central differences, per scenario.

    Differences are taken in coordinates scaled per component, so one step
    size suits both meter-scale positions and large controller states.
    """
    rng = np.random.default_rng(seed)
    scenarios = bundled_scenarios() if scenarios is None else scenarios
    worst = 0.0
    failures = []
    per_scenario = {}
    total = 0
    for sc in scenarios:
        config = sc.controller_config()
        mats = build_matrices(sc.n, sc.params.mass, config)
        n = sc.n
        sc_worst = 0.0
        for _ in range(cases):
            x, zeta = random_state(rng, sc, config)
            z0 = np.concatenate([x, zeta])
            ev = barrier_h(x, zeta, config, mats)
            # cap each step so h moves by at most 1% of the soft-min width 1/rho
            base = np.concatenate([np.full(3 * n, 1e-4), np.full(3 * n, 1e-6),
                                   np.full(3 * sc.ell, max(np.abs(zeta).max(), 1e-12) * 1e-6)])
            g = np.abs(np.concatenate([ev.grad_x, ev.grad_zeta]))
            steps = np.minimum(base, 1e-2 / (config.rho * np.maximum(g, 1e-300)))

            def h_scaled(y, z0=z0, steps=steps, config=config, mats=mats, n=n):
                z = z0 + steps * y
                return barrier_h(z[: 6 * n], z[6 * n :], config, mats).h

            fd = finite_difference_gradient(h_scaled, np.zeros_like(z0), eps=1.0) / steps
            an = np.concatenate([ev.grad_x, ev.grad_zeta])
            err = float(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-300))
            if err > tol:
                failures.append(total)
            sc_worst = max(sc_worst, err)
            total += 1
        per_scenario[sc.name] = f"{sc_worst:.2e}"
        worst = max(worst, sc_worst)
    return SweepResult("gradient", total, tol, worst, failures, per_scenario)


# -- KKT ----------------------------------------------------------------------

def kkt_sweep(seed: int = 1, cases: int = 1000, tol: float = 1e-9, competitors: int = 50,
              scenarios: list[Scenario] | None = None) -> SweepResult:
    """Complementary slackness of the closed-form filter and a random search for a cheaper feasible point.

    Besides the absolute product |lambda b|, the scale-free residual
    |b| / (sum of the magnitudes of the terms of b) is reported; the
    absolute product grows like eps |mu - mu_d|^2 with the size of the
    correction, whatever the evaluation order.
    """
    rng = np.random.default_rng(seed)
    scenarios = bundled_scenarios() if scenarios is None else scenarios
    setups = []
    for sc in scenarios:
        config = sc.controller_config()
        setups.append((sc, config, build_matrices(sc.n, sc.params.mass, config)))
    worst = 0.0
    worst_rel = 0.0
    failures = []
    per_scenario = {sc.name: 0.0 for sc in scenarios}
    active = 0
    beaten = 0
    for k in range(cases):
        sc, config, mats = setups[k % len(setups)]
        x, zeta = random_state(rng, sc, config)
        ev = barrier_h(x, zeta, config, mats)
        # random mu_d whose constraint value is placed on either side of zero
        g = config.Bc.T @ ev.grad_zeta
        xi = rng.normal(size=3 * sc.ell) * np.abs(zeta).max()
        b_xi = constraint_b(x, zeta, xi, 0.0, ev, config, mats)
        target = rng.uniform(-1.0, 1.0) * (abs(b_xi) + abs(config.alpha * ev.h))
        mu_d = xi + (target - b_xi) / (g @ g) * g
        dec = optimal_control(x, zeta, mu_d, config, mats, ev)
        b_star = constraint_b(x, zeta, dec.mu, dec.eta, ev, config, mats)
        terms = np.array([ev.grad_x @ drift(x, zeta, mats), ev.grad_zeta @ (config.Ac @ zeta),
                          ev.grad_zeta @ (config.Bc @ dec.mu), config.alpha * ev.h, dec.eta * ev.h])
        rel = abs(b_star) / max(np.abs(terms).sum(), 1e-300) if dec.lam > 0 else 0.0
        slack = abs(dec.lam * b_star)
        worst = max(worst, slack)
        worst_rel = max(worst_rel, rel)
        per_scenario[sc.name] = max(per_scenario[sc.name], slack)
        bad = slack > tol or b_star < -np.abs(terms).sum() * 1e-12
        if dec.lam > 0:
            active += 1
        j_star = filter_cost(dec.mu, dec.eta, mu_d, config.gamma)
        spread = max(np.linalg.norm(dec.mu - mu_d), 1e-12)
        for _ in range(competitors):
            mu = dec.mu + rng.normal(size=dec.mu.size) * spread * 10.0 ** rng.uniform(-6, 0)
            eta = dec.eta + rng.normal() * abs(dec.eta) * 10.0 ** rng.uniform(-6, 0)
            if constraint_b(x, zeta, mu, eta, ev, config, mats) >= 0 and \
                    filter_cost(mu, eta, mu_d, config.gamma) < j_star * (1 - 1e-12):
                beaten += 1
                bad = True
                break
        if bad:
            failures.append(k)
    notes = {"active": active, "beaten": beaten, "worst_rel": f"{worst_rel:.3e}"}
    notes.update({name: f"{v:.2e}" for name, v in per_scenario.items()})
    return SweepResult("kkt", cases, tol, worst, failures, notes)


def run_suite(name: str, seed: int = 1, **kwargs) -> SweepResult:
    try:
        fn = {"allocation": allocation_sweep, "averaging": averaging_sweep, "care": care_sweep,
              "gradient": gradient_sweep, "kkt": kkt_sweep}[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    return fn(seed=seed, **kwargs)
