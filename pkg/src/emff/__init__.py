"""Electromagnetic formation flying: dipole forces, amplitude allocation, LQR with a CBF safety filter."""

from .allocation import PsiParams, allocate_all, allocate_pair, amplitude_pair, psi, psi_grad
from .controller import ControllerConfig, barrier_h, build_matrices, design_lqr, optimal_control
from .dipole import Environment, SatelliteParams, dipole_force_shape, intersatellite_force
from .errors import EMFFError
from .numerics import solve_care
from .scenario import load_bundled, load_scenario
from .sim import Scenario, Simulation, monitor, run_averaged, run_full

__all__ = [
    "ControllerConfig", "EMFFError", "Environment", "PsiParams", "SatelliteParams", "Scenario", "Simulation",
    "allocate_all", "allocate_pair", "amplitude_pair", "barrier_h", "build_matrices", "design_lqr",
    "dipole_force_shape", "intersatellite_force", "load_bundled", "load_scenario", "monitor",
    "optimal_control", "psi", "psi_grad", "run_averaged", "run_full", "solve_care",
]
