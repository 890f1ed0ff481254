"""Phase control of a qubit driven linearly through an avoided crossing.

Submodules: :mod:`lzsm.core` (types, conventions, special functions),
:mod:`lzsm.aim` (adiabatic-impulse model), :mod:`lzsm.ode` (numerical
Schrodinger oracle), :mod:`lzsm.control` (phase solvers),
:mod:`lzsm.sequencer` (multi-passage programs) and :mod:`lzsm.cli`.
"""

from .aim import (
    PassageConfig,
    Theta,
    TransferMatrix,
    adiabatic_transfer_matrix,
    final_probability_adiabatic,
    final_probability_diabatic,
    generalized_composition,
    lzsm_transfer_matrix,
    propagate,
    single_passage_matrix,
    theta,
    zeta_asymptotic,
    zeta_exact,
)
from .control import (
    InterferenceWindow,
    Objective,
    PhaseSolution,
    delta_complete_localization,
    delta_feasibility_bound,
    interference_window,
    phi_constructive,
    phi_destructive,
    phi_zero_interference,
    solve_phase_for_target,
    transitionless_phase,
    transitionless_phase_adiabatic,
    width_max_over_alpha,
)
from .core import (
    Basis,
    BasisMismatchError,
    BlochVector,
    DegeneratePointError,
    DimensionlessTime,
    DomainError,
    Spinor,
    SystemParams,
    adiabaticity,
    arg_gamma_one_minus_i_delta,
    basis_transform,
    bloch,
    gamma_pm,
    lz_probability,
    stokes_phase,
)
from .ode import (
    ConstantWait,
    IntegrationError,
    IntegratorConfig,
    LinearSweep,
    Trajectory,
    compare_aim_vs_ode,
    evolve,
    evolve_constant,
)
from .sequencer import (
    Geometry,
    PlanResult,
    PulseSequence,
    plan_two_passage,
    simulate_sequence_aim,
    simulate_sequence_ode,
    wait_phase,
)

__version__ = "0.1.0"
