"""Mixed finite elements for linearized rotating shallow water with drag and
tidal forcing, on planar meshes and icosahedral sphere approximations."""

from .diagnostics import (
    EnergyReport,
    energy_first_order,
    energy_second_order,
    estimate_inverse_constant,
    estimate_poincare_constant,
    fit_convergence_rate,
    helmholtz_decompose,
    l2_errors,
    solve_steady_geotryptic,
)
from .dynamics import (
    Discretization,
    ManufacturedSolution,
    ModelParams,
    State,
    StepperConfig,
    mms_forcing,
    random_state,
    run,
    step_implicit_midpoint,
    step_symplectic_euler,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    GeometryError,
    ResourceError,
    TidalFemError,
    ValidationError,
)
from .fem import Field, FunctionSpace, build_space
from .forcing import DivergenceForcing, PointwiseForcing, SeparableForcing, ZeroForcing
from .linalg import BlockSystem, LinearSolver, SolverConfig
from .mesh import Mesh, build_icosphere, build_mesh, build_rect_mesh, mesh_statistics

__version__ = "0.1.0"
