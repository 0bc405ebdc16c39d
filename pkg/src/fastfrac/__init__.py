"""Matrix-free DST solvers for time-space fractional diffusion with the spectral fractional Laplacian."""
from .errors import ConfigError, SolverError
from .tensor import Grid, make_grid, unit_grid, mode_apply, hadamard, discrete_l2_norm, discrete_max_norm
from .dst import DstPlan, dst_1d, idst_1d, dst_nd, idst_nd, plan_for, sine_matrix
from .operators import (
    Kind, RhsMode, stiffness_mass_eigenvalues, mode_eigenvalues, mode_sum, build_H, build_V,
    apply_fractional_op, solve_steady, assemble_rhs, load_vector,
)
from .fast_l1 import (
    SoeQuadrature, FastL1State, soe_build, kappa_coefficients, init_state, history_update,
    assemble_g, step, direct_l1_reference, run, save_checkpoint, load_checkpoint,
)
from .problems import (
    ProblemSpec, CahnHilliardSpec, caputo_power, smooth_mode_problem, constant_source_problem,
    stripe_problem, manufactured_problem, solve_problem, cahn_hilliard_run, cahn_hilliard_step,
)

__version__ = "0.1.0"
