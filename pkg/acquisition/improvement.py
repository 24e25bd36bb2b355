"""Improvement-based acquisition functions and the random-search baseline."""
import numpy as np
from scipy.stats import norm

from acquisition.base_acquisition import BaseAcquisition, Incumbent, Utility
from common import seeding
from gp_core.gaussian_process import GaussianProcess


def _split(mean, std, threshold):
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))
    improvement = threshold - mean
    positive = std > 0
    z = np.zeros_like(improvement)
    z[positive] = improvement[positive] / std[positive]
    return improvement, std, positive, z


def probability_of_improvement(mean, std, threshold: float) -> np.ndarray:
    improvement, std, positive, z = _split(mean, std, threshold)
    out = (improvement > 0).astype(float)
    out[positive] = norm.cdf(z[positive])
    return out


def expected_improvement(mean, std, threshold: float) -> np.ndarray:
    improvement, std, positive, z = _split(mean, std, threshold)
    out = np.maximum(improvement, 0.0)
    zp = z[positive]
    out[positive] = std[positive] * (zp * norm.cdf(zp) + norm.pdf(zp))
    return np.maximum(out, 0.0)


class ProbabilityOfImprovement(BaseAcquisition):
    def utility(self, gp: GaussianProcess, incumbent: Incumbent) -> Utility:
        threshold = self.config.gamma * incumbent.mu_star

        def pi(U: np.ndarray) -> np.ndarray:
            mean, var = gp.predict(U)
            return probability_of_improvement(mean, np.sqrt(var), threshold)

        return pi


class ExpectedImprovement(BaseAcquisition):
    def utility(self, gp: GaussianProcess, incumbent: Incumbent) -> Utility:
        threshold = self.config.gamma * incumbent.mu_star

        def ei(U: np.ndarray) -> np.ndarray:
            mean, var = gp.predict(U)
            return expected_improvement(mean, np.sqrt(var), threshold)

        return ei


class RandomSearch(BaseAcquisition):
    """Uniform proposals; the baseline every model-based setting should beat."""

    @property
    def needs_incumbent(self) -> bool:
        return False

    def utility(self, gp: GaussianProcess, incumbent: Incumbent) -> Utility:
        return lambda U: np.zeros(np.atleast_2d(U).shape[0])

    def propose(self, gp: GaussianProcess, incumbent: Incumbent) -> np.ndarray:
        rng = seeding.generator(self.seed, seeding.STREAM_ACQUISITION)
        return rng.uniform(0.0, 1.0, size=2)
