"""Chaos diagnostics for driven Kerr parametric oscillators.

The package maps the transition from regularity to chaos in a sinusoidally
driven oscillator with third- and fourth-rank nonlinearities (the quartic
reduction of a junction-array circuit), combining Floquet level statistics,
phase-space diagnostics of the cat-qubit states, and classical Lyapunov
analysis.
"""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    ContractError,
    FluxConfigurationError,
    IntegrationError,
    KerrChaosError,
    RootBracketError,
    SchemaError,
    StabilityError,
    StatisticsError,
    TruncationError,
)
from .model import (
    ClassicalParams,
    DerivedScales,
    FockSpace,
    OscillatorParams,
    SnailExpansion,
    SnailParams,
    build_drive_operator,
    build_static_hamiltonian,
    classical_from_quantum,
    default_fock_dimension,
    derived_scales,
    kerr_nonlinearity,
    params_from_targets,
    quantum_from_classical,
    second_order_kerr,
    snail_coefficients,
    squeezing_amplitude,
)
from .floquet import (
    FloquetSolution,
    SpacingStats,
    floquet_solve,
    floquet_spectrum,
    propagate_one_period,
    spacing_ratio,
)
from .qphase import (
    CatPair,
    CoherentState,
    HusimiField,
    PhaseGrid,
    adaptive_phase_grid,
    coherent_from_phase_point,
    coherent_state,
    find_cat_pair,
    husimi,
    participation_ratio,
    wehrl_entropy,
)
from .classical import (
    CriticalPointSet,
    FullSnailFlow,
    Lemniscate,
    LyapunovResult,
    ProbeSpec,
    ThresholdFamily,
    ThresholdResult,
    Trajectory,
    critical_points,
    full_snail_rhs,
    hamilton_rhs,
    integrate,
    lemniscate,
    lyapunov,
    lyapunov_batch,
    lyapunov_field,
    poincare_section,
    static_energy,
    stroboscopic_fixed_point,
    tangent_map,
    threshold_scan,
)
from .maps import (
    ChaosMapGrid,
    DisintegrationScan,
    GridSpec,
    chaos_map,
    disintegration_scan,
    load_map,
    load_scan,
    save_map,
    save_scan,
)
