"""Spectral toolkit for plasmon resonance of the 3D Lame system.

Core-shell-matrix spheres with a negative shell multiplier: perfect plasmon
waves, exact lossy transmission solves, dissipation energies and primal/dual
variational bounds, including the critical source radius R^{3/2}.
"""

from .harmonics import (
    DerivativeTable,
    HarmonicIndex,
    SMatrixSet,
    SphereQuadrature,
    build_derivative_tables,
    build_quadrature,
    build_s_matrices,
    eval_Y,
    shared_quadrature,
    shared_tables,
    sph_harm_stack,
)
from .lame import (
    LameParams,
    ModeConstants,
    ModeField,
    Term,
    exterior_mode,
    exterior_traction_coeffs,
    interior_from_displacement,
    interior_from_traction,
    interior_mode,
    mode_constants,
    numeric_traction,
)
from .waves import (
    PerfectWave,
    PlasmonConstants,
    PlasmonEigenProblem,
    assemble_H,
    kelvin_matrix,
    np_eigenvalue_map,
    np_galerkin_spectrum,
    perfect_wave,
    plasmon_constants,
    plasmon_kernel,
    verify_perfect_wave,
)
from .transmission import (
    LayeredMedium,
    ModeSolution,
    ResonantSingularityError,
    SourceSpec,
    eval_field,
    kernel_basis,
    project_source,
    residual_check,
    solve_mode,
    solve_modes,
)
from .energy import (
    EnergyReport,
    dissipation_E,
    functional_I,
    functional_J,
    pairing_P,
    pairing_P_pieces,
    volumetric_P,
)
from .scenarios import (
    Piece,
    SweepResult,
    WitnessParams,
    fixed_configuration,
    schedule_n_delta,
    scheduled_configuration,
    sweep,
    witness_core_resonant,
    witness_fixed_c,
    witness_nocore,
    witness_radial_nonresonant,
)

__version__ = "0.1.0"
