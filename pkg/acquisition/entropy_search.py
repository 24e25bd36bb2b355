"""
Sampling-based entropy search.

The distribution of the minimizer location is represented on a fixed lattice
of representer points and estimated by counting the argmin of joint posterior
draws. Common random numbers are used across candidates, so scores of
different candidates are compared on the same draws. The expectation over the
hypothetical measurement uses probabilists' Gauss-Hermite quadrature.
"""
import logging
import math
from typing import Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from acquisition.base_acquisition import AcquisitionConfig, BaseAcquisition, Incumbent, Utility
from common import seeding
from gp_core.gaussian_process import JITTER_MAX, GaussianProcess
from gp_core.hyperparams import ControllerParams

logger = logging.getLogger(__name__)

GAUSS_HERMITE_NODES = 9
SAMPLING_JITTER = 1e-8
# Representer variance below this fraction of the prior variance counts as no uncertainty.
DEGENERATE_VARIANCE = 1e-12


def representer_lattice(count: int) -> np.ndarray:
    """Cell-centred lattice with at least ``count`` points, symmetric about the box centre."""
    rows = int(math.ceil(math.sqrt(count)))
    cols = int(math.ceil(count / rows))
    lam = (np.arange(rows) + 0.5) / rows
    duty = (np.arange(cols) + 0.5) / cols
    L, D = np.meshgrid(lam, duty, indexing="ij")
    return np.column_stack([L.ravel(), D.ravel()])


def _sampling_factor(S: np.ndarray, scale: float) -> np.ndarray:
    eye = np.eye(S.shape[0])
    jitter = SAMPLING_JITTER
    while True:
        try:
            return np.linalg.cholesky(S + jitter * scale * eye)
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                break
            jitter *= 10.0
    # PSD square root as the last resort
    w, Q = np.linalg.eigh(S)
    return Q * np.sqrt(np.clip(w, 0.0, None))


def _argmin_entropy(samples: np.ndarray, n_bins: int) -> np.ndarray:
    """Entropy of the empirical argmin histogram along the last axis, batched over leading axes."""
    idx = samples.argmin(axis=-1)
    flat = idx.reshape(-1, idx.shape[-1])
    out = np.empty(flat.shape[0])
    for i, row in enumerate(flat):
        p = np.bincount(row, minlength=n_bins) / row.size
        p = p[p > 0]
        out[i] = -np.sum(p * np.log(p))
    return out.reshape(idx.shape[:-1])


class EntropySearch(BaseAcquisition):
    def __init__(self, config: AcquisitionConfig, seed: int = 0):
        super().__init__(config, seed)
        self.representers = representer_lattice(config.es_representer_count)
        rng = seeding.generator(seed, seeding.STREAM_ACQUISITION)
        self._z = rng.standard_normal((config.es_mc_samples, self.representers.shape[0]))
        nodes, weights = hermegauss(GAUSS_HERMITE_NODES)
        self._nodes = nodes
        self._weights = weights / weights.sum()

    @property
    def needs_incumbent(self) -> bool:
        return False

    def _current_entropy(self, mean: np.ndarray, cov: np.ndarray, scale: float) -> Tuple[float, np.ndarray]:
        L = _sampling_factor(cov, scale)
        samples = mean + self._z @ L.T
        return float(_argmin_entropy(samples, len(mean))), L

    def utility(self, gp: GaussianProcess, incumbent: Incumbent = None) -> Utility:
        R = self.representers
        n_rep = R.shape[0]
        scale = gp.hyperparams.total_signal_variance
        noise_var = gp.hyperparams.noise_std ** 2
        mean, cov = gp.joint(R)
        if np.max(np.diag(cov)) <= DEGENERATE_VARIANCE * scale:
            logger.debug("representer posterior is degenerate, entropy search scores zero")
            return lambda U: np.zeros(np.atleast_2d(U).shape[0])
        h_now, _ = self._current_entropy(mean, cov, scale)

        def es(U: np.ndarray) -> np.ndarray:
            U = np.atleast_2d(U)
            cross = gp.cross_covariance(R, U)
            _, var = gp.predict(U)
            out = np.empty(U.shape[0])
            for j in range(U.shape[0]):
                s = var[j] + noise_var
                c = cross[:, j]
                # Conditioning on y shifts the mean along c and removes c c^T / s from the covariance.
                L = _sampling_factor(cov - np.outer(c, c) / s, scale)
                base = mean + self._z @ L.T
                shifts = self._nodes[:, None] * (c / math.sqrt(s))[None, :]
                samples = base[None, :, :] + shifts[:, None, :]
                h_after = _argmin_entropy(samples, n_rep)
                out[j] = h_now - float(self._weights @ h_after)
            return out

        return es


def es_score(gp: GaussianProcess, candidate: ControllerParams, cfg: AcquisitionConfig, seed: int = 0) -> float:
    """Expected reduction of the minimizer-location entropy after measuring ``candidate``, in nats."""
    return float(EntropySearch(cfg, seed).evaluate(gp, candidate.to_unit(), None)[0])
