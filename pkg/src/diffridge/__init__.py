"""Ridge-type nonparametric estimation of the squared diffusion coefficient
of a 1-D SDE from discrete high-frequency observations of one or many paths,
with a Monte-Carlo experiment harness and a kernel-regression baseline.
"""

from .sde import (AssumptionViolation, Coefficient, DiffusionPath, ModelSpec,
                  NonFiniteState, PathSample, BUILTIN_MODEL_IDS, builtin_model,
                  path_stream_seed, simulate_path, simulate_sample, true_sigma_sq)
from .bases import (BasisSpec, BSplineBasis, FourierBasis, HermiteBasis,
                    InvalidInterval, KnotVector, design_matrix, dimension_grid,
                    eval_basis, make_knots, spline_dimension_grid)
from .ridge import (DimensionMismatch, EstimatorFn, NonFiniteInput, RidgeFit,
                    build_response, contrast, evaluate, fit_ridge,
                    truncated_estimator)
from .selection import (PenaltySpec, SelectionResult, calibrate_kappa, make_basis,
                        oracle_dimension, select_dimension)
from .metrics import (ExperimentConfig, GramDiagnostics, MiseReport,
                      empirical_sq_distance, empirical_sq_norm, gram_diagnostics,
                      gram_matrix, mise_experiment, mise_experiment_pair,
                      resolve_setting, restricted_truth)
from .baseline import DegeneratePath, KernelSpec, nw_estimate, scott_bandwidth

__version__ = "0.1.0"
