from gp_core.hyperparams import (
    ControllerParams,
    Dataset,
    HyperPrior,
    Hyperparams,
    KernelKind,
    Observation,
    PosteriorStats,
)
from gp_core.kernels import kernel_eval, kernel_matrix
from gp_core.gaussian_process import GaussianProcess, log_marginal_likelihood, posterior
from gp_core.map_estimation import MapFitResult, map_fit

__all__ = [
    "ControllerParams", "Dataset", "HyperPrior", "Hyperparams", "KernelKind", "Observation",
    "PosteriorStats", "kernel_eval", "kernel_matrix", "GaussianProcess", "log_marginal_likelihood",
    "posterior", "MapFitResult", "map_fit",
]
