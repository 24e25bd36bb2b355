import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from common.exceptions import ConditioningError
from gp_core.hyperparams import ControllerParams, Dataset, Hyperparams, PosteriorStats
from gp_core.kernels import BaseKernel, get_kernel

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
LOG_2PI = math.log(2.0 * math.pi)


def stable_cholesky(K: np.ndarray, scale: float) -> np.ndarray:
    """Lower Cholesky factor of K.

    A plain factorization is tried first; on failure ``JITTER_START * scale`` is
    added to the diagonal and escalated by x10 up to ``JITTER_MAX * scale``.
    """
    try:
        return linalg.cholesky(K, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_MAX * (1.0 + 1e-12):
        try:
            L = linalg.cholesky(K + jitter * scale * eye, lower=True, check_finite=False)
            logger.debug("Cholesky needed jitter %.1e", jitter * scale)
            return L
        except linalg.LinAlgError:
            jitter *= 10.0
    raise ConditioningError(f"matrix of size {K.shape[0]} not positive definite after jitter {JITTER_MAX:.0e}*{scale:.3g}")


class GaussianProcess:
    """GP with constant mean conditioned on a dataset. Immutable after construction."""

    def __init__(self, hyperparams: Hyperparams, dataset: Optional[Dataset] = None):
        self.hyperparams = hyperparams
        self.dataset = dataset if dataset is not None else Dataset()
        self.kernel: BaseKernel = get_kernel(hyperparams.kernel)
        self._params = hyperparams.free_parameters()
        self.X = self.dataset.unit_inputs()
        self.residuals = self.dataset.costs() - hyperparams.mean_const
        n = len(self.dataset)
        if n:
            K = self.kernel.covariance(self._params, self.X, self.X) + hyperparams.noise_std ** 2 * np.eye(n)
            self._L = stable_cholesky(K, hyperparams.total_signal_variance)
            self._alpha = linalg.cho_solve((self._L, True), self.residuals, check_finite=False)
        else:
            self._L = np.zeros((0, 0))
            self._alpha = np.zeros(0)

    def __len__(self) -> int:
        return len(self.dataset)

    def predict(self, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance at unit-box points, shape (m,)."""
        U = np.atleast_2d(U)
        prior_var = self.kernel.diagonal(self._params, U.shape[0])
        if not len(self):
            return np.full(U.shape[0], self.hyperparams.mean_const), prior_var
        Ks = self.kernel.covariance(self._params, U, self.X)
        mean = self.hyperparams.mean_const + Ks @ self._alpha
        V = linalg.solve_triangular(self._L, Ks.T, lower=True, check_finite=False)
        var = prior_var - np.einsum("ij,ij->j", V, V)
        return mean, np.maximum(var, 0.0)

    def joint(self, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean vector and latent covariance matrix at unit-box points."""
        U = np.atleast_2d(U)
        prior_cov = self.kernel.covariance(self._params, U, U)
        if not len(self):
            return np.full(U.shape[0], self.hyperparams.mean_const), prior_cov
        Ks = self.kernel.covariance(self._params, U, self.X)
        mean = self.hyperparams.mean_const + Ks @ self._alpha
        V = linalg.solve_triangular(self._L, Ks.T, lower=True, check_finite=False)
        return mean, prior_cov - V.T @ V

    def cross_covariance(self, U: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Posterior latent covariance between two point sets."""
        U, W = np.atleast_2d(U), np.atleast_2d(W)
        prior = self.kernel.covariance(self._params, U, W)
        if not len(self):
            return prior
        Vu = linalg.solve_triangular(self._L, self.kernel.covariance(self._params, self.X, U), lower=True, check_finite=False)
        Vw = linalg.solve_triangular(self._L, self.kernel.covariance(self._params, self.X, W), lower=True, check_finite=False)
        return prior - Vu.T @ Vw

    def posterior(self, theta: ControllerParams) -> PosteriorStats:
        mean, var = self.predict(theta.to_unit())
        return PosteriorStats(mean=float(mean[0]), variance=float(var[0]))

    def log_marginal_likelihood(self) -> float:
        n = len(self)
        if not n:
            return 0.0
        return float(
            -0.5 * self.residuals @ self._alpha
            - np.log(np.diag(self._L)).sum()
            - 0.5 * n * LOG_2PI
        )


def posterior(hyperparams: Hyperparams, data: Dataset, theta: ControllerParams) -> PosteriorStats:
    return GaussianProcess(hyperparams, data).posterior(theta)


def log_marginal_likelihood(hyperparams: Hyperparams, data: Dataset) -> float:
    return GaussianProcess(hyperparams, data).log_marginal_likelihood()
