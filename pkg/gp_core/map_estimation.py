"""
MAP estimation of kernel hyperparameters.

The optimizer works on log-transformed hyperparameters so every iterate stays
positive; the Gaussian hyperprior densities are still evaluated on the natural
scale, with the chain rule applied to their gradients. Noise std and the
constant mean are never learned.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg, optimize

from common import seeding
from common.exceptions import ConditioningError, ParameterDomainError
from gp_core.gaussian_process import LOG_2PI, stable_cholesky
from gp_core.hyperparams import Dataset, HyperPrior, Hyperparams
from gp_core.kernels import get_kernel

logger = logging.getLogger(__name__)

N_RESTARTS = 8
RESTART_LOG_STD = 0.5
MAX_ITER = 200
# Box on log-hyperparameters, relative to the prior mean.
LOG_BOUND_WIDTH = math.log(1e3)
_FAILED = 1e25


class MapFitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    hyperparams: Hyperparams
    objective: float
    success: bool
    warning: Optional[str] = None


class MapObjective:
    """Negative (log marginal likelihood + log hyperprior) and its gradient in log space."""

    def __init__(self, start: Hyperparams, data: Dataset, priors: HyperPrior):
        self.start = start
        self.kernel = get_kernel(start.kernel)
        self.names: List[str] = list(start.free_parameters())
        self.priors = [priors.entries[name] for name in self.names]
        self.X = data.unit_inputs()
        self.y = data.costs() - start.mean_const
        self.noise_var = start.noise_std ** 2
        self.n_evals = 0

    def to_params(self, log_vec: np.ndarray) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, np.exp(log_vec))}

    def value_and_grad(self, log_vec: np.ndarray) -> Tuple[float, np.ndarray]:
        self.n_evals += 1
        params = self.to_params(log_vec)
        n = self.X.shape[0]
        K, grads = self.kernel.covariance_with_grads(params, self.X)
        K = K + self.noise_var * np.eye(n)
        scale = float(np.mean(self.kernel.diagonal(params, 1)))
        try:
            L = stable_cholesky(K, scale)
        except ConditioningError:
            return _FAILED, np.zeros_like(log_vec)
        alpha = linalg.cho_solve((L, True), self.y, check_finite=False)
        K_inv = linalg.cho_solve((L, True), np.eye(n), check_finite=False)
        lml = -0.5 * self.y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * LOG_2PI
        W = np.outer(alpha, alpha) - K_inv
        grad = np.array([0.5 * np.sum(W * grads[name]) for name in self.names])

        values = np.exp(log_vec)
        log_prior = 0.0
        for i, (prior, value) in enumerate(zip(self.priors, values)):
            log_prior += prior.log_density(value)
            # chain rule: d/dlog p = p * d/dp
            grad[i] += -(value - prior.mean) / prior.std ** 2 * value
        objective = -(lml + log_prior)
        if not np.isfinite(objective):
            return _FAILED, np.zeros_like(log_vec)
        return float(objective), -grad

    def __call__(self, log_vec: np.ndarray) -> float:
        return self.value_and_grad(log_vec)[0]


def _restart_points(prior_means: np.ndarray, n_restarts: int, rng: np.random.Generator) -> List[np.ndarray]:
    base = np.log(prior_means)
    starts = [base]
    for _ in range(n_restarts - 1):
        starts.append(base + rng.normal(0.0, RESTART_LOG_STD, size=base.shape))
    return starts


def map_fit(
    hyperparams: Hyperparams,
    data: Dataset,
    priors: HyperPrior,
    seed: int = 0,
    n_restarts: int = N_RESTARTS,
) -> MapFitResult:
    """Maximize marginal likelihood times hyperprior, starting from the prior means.

    The returned objective is never worse than the one at ``hyperparams``.
    """
    if not len(data):
        raise ValueError("MAP estimation needs at least one observation")
    if not priors.covers(hyperparams):
        missing = set(hyperparams.free_parameters()) - set(priors.entries)
        raise ParameterDomainError(f"hyperprior missing for {sorted(missing)}")

    objective = MapObjective(hyperparams, data, priors)
    prior_means = np.array([p.mean for p in objective.priors])
    start_vec = np.log(np.array([hyperparams.free_parameters()[n] for n in objective.names]))
    start_value = objective(start_vec)
    bounds = [(m - LOG_BOUND_WIDTH, m + LOG_BOUND_WIDTH) for m in np.log(prior_means)]

    rng = seeding.generator(seed, seeding.STREAM_MAP_FIT)
    best_vec, best_value = start_vec, start_value
    n_usable = 0
    for x0 in _restart_points(prior_means, n_restarts, rng):
        x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
        try:
            res = optimize.minimize(
                objective.value_and_grad, x0, jac=True, method="L-BFGS-B",
                bounds=bounds, options={"maxiter": MAX_ITER},
            )
        except (ValueError, FloatingPointError, linalg.LinAlgError) as e:
            logger.debug("MAP restart raised: %s", e)
            continue
        if not np.isfinite(res.fun) or res.fun >= _FAILED:
            continue
        n_usable += 1
        if res.fun < best_value:
            best_vec, best_value = res.x, float(res.fun)

    if n_usable == 0:
        message = f"all {n_restarts} MAP restarts failed; keeping starting hyperparameters"
        logger.warning(message)
        return MapFitResult(hyperparams=hyperparams, objective=-start_value, success=False, warning=message)

    if best_vec is start_vec:
        return MapFitResult(hyperparams=hyperparams, objective=-start_value, success=True)
    fitted = hyperparams.with_free_parameters(objective.to_params(best_vec))
    return MapFitResult(hyperparams=fitted, objective=-best_value, success=True)
