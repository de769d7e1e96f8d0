"""Partitioned sparse Gaussian-process regression.

Three predictors over one shared kernel:

- an exact dense GP baseline (``fit_full_gp``),
- a sparse GP with jointly optimized pseudo-inputs (``fit_spgp``),
- a partitioned sparse GP whose subdomain predictors are stitched to agree
  at boundary control points (``fit_splk``), plus its uncorrected
  local-kriging baseline (``naive_local_predict``).

Synthetic data generators, a train/test benchmark harness, and a CLI
(``splk --help``) round out the toolkit.
"""

__version__ = "0.1.0"

from .data import (Dataset, Standardization, augment_dimension,
                   destandardize_mean, destandardize_variance,
                   fluctuated_from_preset, gen_fluctuated, gen_gp_sample,
                   load_csv, mse, save_csv, split, standardize)
from .errors import (FactorizationError, InvalidInputError, NumericalError,
                     PartitionError, SplkError)
from .gp import FullGpModel, build_full_gp, fit_full_gp, log_marginal_likelihood, predict_full_gp
from .kernel import KernelParams, default_params, kernel_eval, kernel_matrix
from .local_kriging import (SplkModel, estimate_boundary_values, fit_splk,
                            naive_local_predict, predict_with_local, splk_predict)
from .model_io import load_model, save_model
from .optimize import OptimizerSettings
from .partition import (AxisRotation, BoundaryGrid, OrthopeDomain, PartitionSpec,
                        assign_points, control_point_grid, face_count, infer_domain,
                        make_cuts, partition_report, pca_rotate, pseudo_count)
from .spgp import (SpgpModel, build_spgp, dense_delta, fit_spgp, low_rank_cov,
                   solve_delta, spgp_log_marginal, spgp_predict)

__all__ = [
    "AxisRotation", "BoundaryGrid", "Dataset", "FactorizationError",
    "FullGpModel", "InvalidInputError", "KernelParams", "NumericalError",
    "OptimizerSettings", "OrthopeDomain", "PartitionError", "PartitionSpec",
    "SpgpModel", "SplkError", "SplkModel", "Standardization",
    "assign_points", "augment_dimension", "build_full_gp", "build_spgp",
    "control_point_grid", "default_params", "dense_delta",
    "destandardize_mean", "destandardize_variance", "estimate_boundary_values",
    "face_count", "fit_full_gp", "fit_splk", "fit_spgp",
    "fluctuated_from_preset", "gen_fluctuated", "gen_gp_sample", "infer_domain",
    "kernel_eval", "kernel_matrix", "load_csv", "load_model",
    "log_marginal_likelihood", "low_rank_cov", "make_cuts", "mse",
    "naive_local_predict", "partition_report", "pca_rotate", "predict_full_gp",
    "predict_with_local", "pseudo_count", "save_csv", "save_model",
    "solve_delta", "spgp_log_marginal", "spgp_predict", "splk_predict",
    "split", "standardize",
]
