"""Radial numerical laboratory for normalized states of the defocusing
Gross-Pitaevskii-Poisson equation  -Delta u + lambda u + u^3 = (I_alpha*u^2) u
on R^3 under the mass constraint |u|_2 = rho."""

from .branch import (
    BranchCurve,
    BranchError,
    BranchRow,
    ThresholdReport,
    curve_to_csv,
    decay_diagnostic,
    detect_thresholds,
    domain_for,
    fit_power_law,
    limit_profile_error,
    mass_radius,
    sidecar_payload,
    sweep,
)
from .energy import (
    EnergyReport,
    IdentityResiduals,
    barrier,
    evaluate,
    fiber_profile,
    identity_residuals,
    solve_enp_system,
    threshold_constants,
)
from .grid import (
    GppParams,
    RadialField,
    RadialGrid,
    build_grid,
    dilate,
    dirichlet_energy,
    dump_field,
    l2_norm,
    l4_norm4,
    load_field,
    project_mass,
    rescale_family,
)
from .riesz import (
    RieszConstants,
    RieszKernel,
    apply_potential,
    build_kernel,
    constants,
    interaction_energy,
)
from .solvers import (
    NoConvergenceError,
    SolveResult,
    SolverConfig,
    SolverError,
    minimize_normalized,
    solve_choquard_frequency,
    solve_choquard_min,
    solve_choquard_mp,
    solve_mp_type2,
    solve_tf,
)

__version__ = "0.1.0"
