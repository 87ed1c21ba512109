"""Multi-species biofilm community simulator.

Continuum model of n interacting species at a material point: volume
fractions and living fractions evolve under nutrient and antibiotic forcing,
subject to the shared-volume constraint enforced by a Lagrange multiplier
and logarithmic barriers that keep every fraction inside (0, 1).  A fully
implicit stepper integrates the resulting differential-algebraic system.
"""
from .model import (
    BOUNDARY_CLAMP,
    Constant,
    DomainError,
    ForcingSignal,
    ModelParams,
    SimState,
    Sinusoid,
    Step,
    barrier_force,
    dead_fractions,
    dissipation_potential,
    dissipation_rate,
    free_energy_density,
    initial_state,
    interaction_drive,
    jacobian,
    living_fractions,
    pack_state,
    residual,
    unpack_state,
)
from .output import render_trajectory, write_trajectory
from .scenarios import (
    PRESET_DESCRIPTIONS,
    PRESET_NAMES,
    ConfigError,
    ScenarioConfig,
    load_config,
    parse_config,
    permute_species,
    preset,
    serialize_config,
)
from .solver import (
    NonConvergenceError,
    SingularJacobianError,
    SolverError,
    SolverSettings,
    StepDiagnostics,
    Termination,
    Trajectory,
    run,
    solve_step,
)
from .verification import (
    CheckReport,
    check_dissipation_gradient,
    check_energy_gradient,
    check_jacobian,
    compare_fractions,
    figure_checks,
    reference_trajectory,
    run_verification,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY_CLAMP",
    "CheckReport",
    "ConfigError",
    "Constant",
    "DomainError",
    "ForcingSignal",
    "ModelParams",
    "NonConvergenceError",
    "PRESET_DESCRIPTIONS",
    "PRESET_NAMES",
    "ScenarioConfig",
    "SimState",
    "SingularJacobianError",
    "Sinusoid",
    "SolverError",
    "SolverSettings",
    "Step",
    "StepDiagnostics",
    "Termination",
    "Trajectory",
    "barrier_force",
    "check_dissipation_gradient",
    "check_energy_gradient",
    "check_jacobian",
    "compare_fractions",
    "dead_fractions",
    "dissipation_potential",
    "dissipation_rate",
    "figure_checks",
    "free_energy_density",
    "initial_state",
    "interaction_drive",
    "jacobian",
    "living_fractions",
    "load_config",
    "pack_state",
    "parse_config",
    "permute_species",
    "preset",
    "reference_trajectory",
    "render_trajectory",
    "residual",
    "run",
    "run_verification",
    "serialize_config",
    "solve_step",
    "unpack_state",
    "write_report",
    "write_trajectory",
]
