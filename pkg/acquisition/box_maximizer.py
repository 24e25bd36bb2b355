"""Coarse-grid plus Nelder-Mead maximization over the normalized controller box."""
import logging
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import optimize

from acquisition.base_acquisition import AcquisitionConfig, AcquisitionKind, BaseAcquisition, Incumbent
from acquisition.entropy_search import EntropySearch, es_score
from acquisition.improvement import (
    ExpectedImprovement,
    ProbabilityOfImprovement,
    RandomSearch,
    expected_improvement,
    probability_of_improvement,
)
from gp_core.gaussian_process import GaussianProcess
from gp_core.hyperparams import ControllerParams, PosteriorStats

logger = logging.getLogger(__name__)

GRID_SHAPE: Tuple[int, int] = (41, 31)
N_REFINE_STARTS = 5
MAX_REFINE_EVALS = 200


class BoxOptimum(NamedTuple):
    u: np.ndarray
    value: float


def box_grid(shape: Tuple[int, int] = GRID_SHAPE) -> np.ndarray:
    """Lattice including the box corners, flattened wavelength-major (lexicographic order)."""
    L, D = np.meshgrid(np.linspace(0.0, 1.0, shape[0]), np.linspace(0.0, 1.0, shape[1]), indexing="ij")
    return np.column_stack([L.ravel(), D.ravel()])


def _refine(func: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: np.ndarray, max_evals: int) -> BoxOptimum:
    def negative(x: np.ndarray) -> float:
        return -float(func(np.clip(x, 0.0, 1.0)[None, :])[0])

    direction = np.where(x0 < 0.5, 1.0, -1.0)
    simplex = np.vstack([x0, x0 + [direction[0] * step[0], 0.0], x0 + [0.0, direction[1] * step[1]]])
    res = optimize.minimize(
        negative, x0, method="Nelder-Mead",
        options={"maxfev": max_evals, "initial_simplex": simplex, "xatol": 1e-5, "fatol": 1e-10},
    )
    u = np.clip(res.x, 0.0, 1.0)
    return BoxOptimum(u=u, value=-float(res.fun))


def maximize_on_box(
    func: Callable[[np.ndarray], np.ndarray],
    shape: Tuple[int, int] = GRID_SHAPE,
    n_starts: int = N_REFINE_STARTS,
    max_evals: int = MAX_REFINE_EVALS,
) -> BoxOptimum:
    """Maximize a vectorized function on [0, 1]^2.

    Ties on the grid resolve to the first point in wavelength-major order, and a
    refined point replaces the grid best only when strictly better.
    """
    grid = box_grid(shape)
    values = np.asarray(func(grid), dtype=float)
    values = np.where(np.isfinite(values), values, -np.inf)
    order = np.argsort(-values, kind="stable")
    best = BoxOptimum(u=grid[order[0]], value=float(values[order[0]]))
    step = 1.0 / (np.array(shape) - 1)
    for idx in order[:n_starts]:
        candidate = _refine(func, grid[idx], step, max_evals)
        if np.isfinite(candidate.value) and candidate.value > best.value:
            best = candidate
    return best


def find_incumbent(gp: GaussianProcess) -> Incumbent:
    """Posterior-mean minimum over the box."""
    optimum = maximize_on_box(lambda U: -gp.predict(U)[0])
    return Incumbent(mu_star=-optimum.value, theta_star=ControllerParams.from_unit(optimum.u))


_ACQUISITIONS = {
    AcquisitionKind.PI: ProbabilityOfImprovement,
    AcquisitionKind.EI: ExpectedImprovement,
    AcquisitionKind.ES: EntropySearch,
    AcquisitionKind.RANDOM: RandomSearch,
}


def build_acquisition(cfg: AcquisitionConfig, seed: int = 0) -> BaseAcquisition:
    return _ACQUISITIONS[cfg.kind](cfg, seed)


def acq_value(
    cfg: AcquisitionConfig,
    post: PosteriorStats,
    inc: Incumbent,
    gp: Optional[GaussianProcess] = None,
    theta: Optional[ControllerParams] = None,
    seed: int = 0,
) -> float:
    """Utility of a single candidate from its posterior statistics.

    Entropy search depends on the joint posterior, so it needs the model and the
    candidate itself instead of ``post``.
    """
    threshold = cfg.gamma * inc.mu_star
    if cfg.kind == AcquisitionKind.PI:
        return float(probability_of_improvement(post.mean, post.std, threshold))
    if cfg.kind == AcquisitionKind.EI:
        return float(expected_improvement(post.mean, post.std, threshold))
    if cfg.kind == AcquisitionKind.ES:
        if gp is None or theta is None:
            raise ValueError("entropy search needs the model and the candidate controller")
        return es_score(gp, theta, cfg, seed)
    return 0.0


def maximize_acq(
    gp: GaussianProcess,
    cfg: AcquisitionConfig,
    seed: int = 0,
    incumbent: Optional[Incumbent] = None,
) -> ControllerParams:
    acquisition = build_acquisition(cfg, seed)
    if incumbent is None and acquisition.needs_incumbent:
        incumbent = find_incumbent(gp)
    u = acquisition.propose(gp, incumbent)
    logger.debug("%s proposes unit point %s", cfg.kind.value, u)
    return ControllerParams.from_unit(u)
