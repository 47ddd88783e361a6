"""Scenario files: YAML documents with fixed top-level tables.

::

    satellites:   n, mass_kg, turns, coil_area_m2, coil_resistance_ohm,
                  coil_inductance_h, power_cap_w
    constraints:  r_min_m, s_max_mps
    controller:   rho, gamma, ac_scale, alpha0, alpha1, alphav, alpha,
                  wz_pos, wz_vel, wz_zeta, wmu, eps1, eps2
    environment:  kind (deep_space | leo), mu_g, m_earth
    initial:      r_i, v_i (n x 3 arrays), optional zeta0
    formation:    frame (inertial | com), segments: [{start_time_s, d}]
    sim:          mode (averaged | full), horizon_s, period_s,
                  optional substeps, optional safety_filter
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dipole import Environment, SatelliteParams
from .errors import EMFFError
from .sim import FormationSegment, Scenario

SATELLITE_KEYS = {
    "mass_kg": "mass", "turns": "turns", "coil_area_m2": "coil_area",
    "coil_resistance_ohm": "coil_resistance", "coil_inductance_h": "coil_inductance",
    "power_cap_w": "power_cap",
}
CONTROLLER_KEYS = ("rho", "gamma", "ac_scale", "alpha0", "alpha1", "alphav", "alpha",
                   "wz_pos", "wz_vel", "wz_zeta", "wmu", "eps1", "eps2")

BUNDLED = ("example1", "example2", "example3", "example4", "two_sat_deep")


class ScenarioError(EMFFError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__("config_error", f"{field}: {message}")


def _get(doc: dict, path: str):
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ScenarioError(path, "missing required field")
        node = node[part]
    return node


def _number(doc: dict, path: str, positive: bool = False) -> float:
    raw = _get(doc, path)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ScenarioError(path, f"expected a number, got {raw!r}") from None
    if not np.isfinite(value) or (positive and value <= 0):
        raise ScenarioError(path, f"expected a {'positive ' if positive else ''}finite number, got {raw!r}")
    return value


def _vectors(doc: dict, path: str, rows: int) -> np.ndarray:
    raw = _get(doc, path)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(path, "expected a list of 3-vectors") from None
    if arr.shape != (rows, 3) or not np.all(np.isfinite(arr)):
        raise ScenarioError(path, f"expected {rows} finite 3-vectors, got shape {arr.shape}")
    return arr


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "document must be a mapping")
    n_raw = _get(doc, "satellites.n")
    if not isinstance(n_raw, int) or n_raw < 2:
        raise ScenarioError("satellites.n", f"expected an integer >= 2, got {n_raw!r}")
    n = n_raw
    params = SatelliteParams(**{attr: _number(doc, f"satellites.{key}", positive=True)
                                for key, attr in SATELLITE_KEYS.items()})
    kind = _get(doc, "environment.kind")
    if kind not in ("deep_space", "leo"):
        raise ScenarioError("environment.kind", f"expected deep_space or leo, got {kind!r}")
    env = Environment(kind, _number(doc, "environment.mu_g"), _number(doc, "environment.m_earth"))

    controller = {key: _number(doc, f"controller.{key}") for key in CONTROLLER_KEYS}
    for key in CONTROLLER_KEYS:
        if key not in ("ac_scale", "wz_pos", "wz_vel", "wz_zeta") and controller[key] <= 0:
            raise ScenarioError(f"controller.{key}", "must be positive")

    frame = _get(doc, "formation.frame")
    if frame not in ("inertial", "com"):
        raise ScenarioError("formation.frame", f"expected inertial or com, got {frame!r}")
    segs_raw = _get(doc, "formation.segments")
    if not isinstance(segs_raw, list) or not segs_raw:
        raise ScenarioError("formation.segments", "expected a non-empty list")
    segments = []
    for k, seg in enumerate(segs_raw):
        wrapper = {"s": seg}
        segments.append(FormationSegment(_number(wrapper, "s.start_time_s"), _vectors(wrapper, "s.d", n - 1)))

    mode = _get(doc, "sim.mode")
    if mode not in ("averaged", "full"):
        raise ScenarioError("sim.mode", f"expected averaged or full, got {mode!r}")
    sim = doc["sim"]
    substeps = sim.get("substeps")
    if substeps is not None and (not isinstance(substeps, int) or substeps < 1):
        raise ScenarioError("sim.substeps", "expected a positive integer")
    zeta0 = doc["initial"].get("zeta0") if isinstance(doc.get("initial"), dict) else None

    try:
        return _build(doc, name, params, env, n, segments, frame, controller, mode, substeps, zeta0, sim)
    except ValueError as exc:
        raise ScenarioError("initial", str(exc)) from None


def _build(doc, name, params, env, n, segments, frame, controller, mode, substeps, zeta0, sim) -> Scenario:
    return Scenario(
        name=str(doc.get("name", name)), params=params, env=env,
        r0=_vectors(doc, "initial.r_i", n), v0=_vectors(doc, "initial.v_i", n),
        formation=segments, frame=frame,
        r_min=_number(doc, "constraints.r_min_m", positive=True),
        s_max=_number(doc, "constraints.s_max_mps", positive=True),
        controller=controller, horizon=_number(doc, "sim.horizon_s", positive=True), mode=mode,
        period=_number(doc, "sim.period_s", positive=True), substeps=substeps,
        zeta0=None if zeta0 is None else np.array(zeta0, dtype=float),
        safety_filter=bool(sim.get("safety_filter", True)),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    p = sc.params
    sim = {"mode": sc.mode, "horizon_s": float(sc.horizon), "period_s": float(sc.period)}
    if sc.substeps is not None:
        sim["substeps"] = int(sc.substeps)
    if not sc.safety_filter:
        sim["safety_filter"] = False
    initial = {"r_i": sc.r0.tolist(), "v_i": sc.v0.tolist()}
    if np.any(sc.zeta0):
        initial["zeta0"] = sc.zeta0.tolist()
    return {
        "name": sc.name,
        "satellites": {"n": sc.n, **{key: float(getattr(p, attr)) for key, attr in SATELLITE_KEYS.items()}},
        "constraints": {"r_min_m": float(sc.r_min), "s_max_mps": float(sc.s_max)},
        "controller": {key: float(sc.controller[key]) for key in CONTROLLER_KEYS},
        "environment": {"kind": sc.env.kind, "mu_g": float(sc.env.mu_g), "m_earth": float(sc.env.m_earth)},
        "initial": initial,
        "formation": {
            "frame": sc.frame,
            "segments": [{"start_time_s": float(s.start), "d": s.d.tolist()} for s in sc.formation],
        },
        "sim": sim,
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "<parse>"
        raise ScenarioError(where, f"YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    return scenario_from_dict(doc, name=path.stem)


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("emff") / "scenarios" / f"{name}.yaml"))


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_path(name))
