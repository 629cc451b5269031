"""Coupled elastic/viscoelastic waves with localized Kelvin-Voigt damping and delay.

Finite-element simulator plus spectral checks for the energy law,
dissipativity, the imaginary-axis gap, resolvent growth and energy decay.
"""
from .diagnostics import (
    EnergyTrace,
    check_dissipation,
    energy_components,
    fit_decay_exponent,
)
from .discretize import FemMatrices, Mesh, assemble_fem, build_mesh
from .evolve import simulate, simulate_method_of_steps, step
from .generator import (
    SemiDiscreteSystem,
    apply_generator,
    assemble_generator,
    dissipation_form,
    energy_inner,
    solve_stationary,
)
from .model import (
    InitialPreset,
    ModelParams,
    build_initial_state,
    eval_b,
    eval_c,
    load_config,
    parse_config,
    validate_params,
)
from .spectral import (
    ResolventSample,
    SpectrumResult,
    eigenvalues,
    fit_growth_exponent,
    resolvent_norm,
    resolvent_sweep,
)
from .state import StateVector

__version__ = "0.1.0"

__all__ = [
    "EnergyTrace", "FemMatrices", "InitialPreset", "Mesh", "ModelParams", "ResolventSample",
    "SemiDiscreteSystem", "SpectrumResult", "StateVector", "apply_generator", "assemble_fem",
    "assemble_generator", "build_initial_state", "build_mesh", "check_dissipation", "dissipation_form",
    "eigenvalues", "energy_components", "energy_inner", "eval_b", "eval_c", "fit_decay_exponent",
    "fit_growth_exponent", "load_config", "parse_config", "resolvent_norm", "resolvent_sweep",
    "simulate", "simulate_method_of_steps", "solve_stationary", "step", "validate_params",
]
