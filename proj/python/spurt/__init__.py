"""Bifurcation analysis of Oldroyd-B Poiseuille flow with nonmonotonic slip."""

from ._core import (
    ConfigError,
    Cycle,
    HopfPoint,
    ModelParams,
    NewtonDiverged,
    NoOscillation,
    NoSignChange,
    NotConverged,
    SpurtError,
    SteadyState,
    Stepper,
    arnoldi_eigs,
    config_keys,
    cycle_from_transient,
    detect_hopf,
    flow_curve,
    flow_curve_extrema,
    gmres,
    run_command,
    slip_stress,
    slip_stress_deriv,
    solve_cycle,
    solve_steady_for_q,
    steady_eigenvalues,
    steady_flow_rate,
    transient,
)

__all__ = [name for name in dir() if not name.startswith("_")]
