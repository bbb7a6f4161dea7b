"""finslab: least energy solutions of the anisotropic Lane-Emden problem.

A desk-scale numerical laboratory around the quasilinear problem
-Q_N u = u^p (Q_N the anisotropic N-Laplacian of a Finsler norm H) on
bounded domains: norm toolkits with duals and validity checks, the geometric
constants controlling the large-exponent asymptotics, a 1-D shooting solver
on Wulff balls, a P1 finite element minimizer on polygons, and sweep/
extrapolation harnesses that verify the asymptotic formulas numerically.
"""

from .config import ConfigError, RunConfig, load_config, parse_config
from .geometry import (
    GeometryReport,
    anisotropic_perimeter,
    cp_upper_bound,
    d_constant,
    energy_limit,
    limit_constants,
    moser_energy_check,
    moser_exponent,
    moser_function,
    wulff_volume,
)
from .mesh import Mesh, MeshError, disk_mesh, domain_mesh, polygon_mesh, square_mesh
from .norms import (
    AssumptionReport,
    EllipseNorm,
    EuclideanNorm,
    FinslerNorm,
    IdentityReport,
    LqNorm,
    NormError,
    check_assumptions,
    parse_norm,
    verify_identities,
)
from .planar import (
    NonConvergenceError,
    PlanarField,
    SolveConfig,
    SolverError,
    assemble_energy,
    blowup_diagnostics,
    first_eigenvalue,
    least_energy_solution,
    minimize_cp,
)
from .radial import (
    J0_FIRST_ZERO,
    RadialProfile,
    RadialSolution,
    ShootingError,
    green_compare,
    lambda1_wulff,
    liouville_profile,
    pohozaev_residual,
    rescale_to_domain,
    rescaled_profile,
    shoot,
    solve_radial,
)
from .sweep import (
    ExtrapolationResult,
    SweepRecord,
    SweepResult,
    extrapolate,
    extrapolate_best,
    run_sweep,
    write_sweep_outputs,
)

__version__ = "0.1.0"
