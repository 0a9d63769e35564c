"""Uniformly subsonic compressible potential flow in infinite nozzles.

Energy-minimizing multilinear FEM on a mapped reference cylinder, damped
Newton with certified subsonic truncation removal, continuation in the
domain length, and critical mass-flux bracketing.
"""

from .analysis import (
    CriticalFluxResult,
    FarFieldReport,
    PoincareReport,
    SweepResult,
    critical_flux_search,
    far_field_check,
    flux_sweep,
    local_average_diagnostic,
    max_speed_and_mach,
    poincare_diagnostic,
    uniqueness_check,
)
from .assembly import (
    assemble_energy,
    assemble_residual,
    assemble_residual_jacobian,
    flux_profile,
    flux_through_section,
)
from .gas import (
    DensityRelation,
    EnergyDensity,
    GasLaw,
    InfeasibleFluxError,
    TruncatedDensity,
    TruncationError,
)
from .mesh import Mesh, build_mesh
from .nozzle import (
    Cylinder,
    GaussianThroat,
    NozzleMap,
    Profile,
    TanhExpansion,
    verify_regularity,
)
from .solver import (
    ContinuationResult,
    FlowProblem,
    NewtonConfig,
    NoConvergenceError,
    SolverReport,
    certify_subsonic,
    continue_in_L,
    newton_solve,
    solve_flow,
)

__version__ = "0.1.0"
