"""Two-level SWIPDG discretization, localized a-posteriori estimator and
localized reduced bases for parametric elliptic multiscale problems."""

__version__ = "0.1.0"

from .grid import NestedGrid, build_nested_grid, diameter, dof_permutation, face_rule, quadrature, triangle_rule
from .problem import (AffineScalarField, ParameterBox, ParametricProblem, ProblemError, Theta,
                      energy_error, energy_norm, equivalence_constants, parse_theta)
from .linalg import SingularMatrixError, SolverError, cg_solve, dense_solve, orthonormalize
from .swipdg import AssembledOperator, assemble, face_coupling_data, solve_dg
from .reconstruct import (check_coarse_conservation, divergence, oswald_interpolate, oswald_matrix,
                          reconstruct_flux)
from .estimate import EstimatorOfflineData, EstimatorReport, eta_global, eta_online, offline_decompose
from .reduced import (ModelFormatError, ReducedModel, estimate_reduced, greedy_train, load_model,
                      save_model, seed_and_extend, seed_constants, solve_reduced)
from .presets import checkerboard_problem, lambda_field, make_problem, manufactured_problem

__all__ = [name for name in dir() if not name.startswith("_")]
