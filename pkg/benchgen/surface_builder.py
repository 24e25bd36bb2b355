"""
Semi-synthetic cost surfaces.

A complete, smoothed grid is perturbed per run by resampling every cell with
Gaussian noise and passing the noise through the same 3x3 mean filter, then
interpolated by a tensor-product natural cubic spline on the normalized box.
The spline is linear in the node values, so each axis is represented by the
weight matrix of a vector-valued spline through the identity.
"""
import hashlib
import json
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy.interpolate import CubicSpline

from acquisition.box_maximizer import maximize_on_box
from benchgen.grid_data import GridData, fill_missing, smooth
from common import seeding
from common.exceptions import DegenerateSurfaceError
from gp_core.hyperparams import DUTY_CYCLE_BOUNDS_PCT, WAVELENGTH_BOUNDS_UM, ControllerParams

logger = logging.getLogger(__name__)

COST_FLOOR = 1e-3
FINE_GRID_SHAPE: Tuple[int, int] = (401, 301)
N_OPTIMUM_STARTS = 3
MAX_RESAMPLE_ATTEMPTS = 20


def grid_hash(g: GridData) -> str:
    digest = hashlib.sha256()
    digest.update(np.asarray(g.wavelengths_px, dtype=np.float64).tobytes())
    digest.update(np.asarray(g.duty_pcts, dtype=np.float64).tobytes())
    digest.update(np.ascontiguousarray(g.array(), dtype=np.float64).tobytes())
    return digest.hexdigest()


class CostSurface(BaseModel):
    model_config = ConfigDict(frozen=True)

    wavelength_nodes: Tuple[float, ...] = Field(description="Spline nodes along wavelength, normalized units.")
    duty_nodes: Tuple[float, ...] = Field(description="Spline nodes along duty cycle, normalized units.")
    node_values: Tuple[Tuple[float, ...], ...] = Field(description="Noisy cost at the nodes.")
    noise_std: float
    floor: float = COST_FLOOR
    seed: int
    source_hash: str
    theta_opt: Optional[ControllerParams] = None
    j_opt: Optional[float] = None

    _splines: Tuple[CubicSpline, CubicSpline] = PrivateAttr()
    _values: np.ndarray = PrivateAttr()

    def model_post_init(self, __context) -> None:
        self._splines = (
            CubicSpline(self.wavelength_nodes, np.eye(len(self.wavelength_nodes)), bc_type="natural"),
            CubicSpline(self.duty_nodes, np.eye(len(self.duty_nodes)), bc_type="natural"),
        )
        self._values = np.asarray(self.node_values, dtype=float)

    def raw_at_units(self, U: np.ndarray) -> np.ndarray:
        """Spline value without the floor."""
        U = np.atleast_2d(U)
        if np.any(U < -1e-12) or np.any(U > 1.0 + 1e-12):
            raise ValueError("cost surfaces are defined inside the controller box only")
        Wl = self._splines[0](U[:, 0])
        Wd = self._splines[1](U[:, 1])
        return np.einsum("mi,ij,mj->m", Wl, self._values, Wd)

    def at_units(self, U: np.ndarray) -> np.ndarray:
        return np.maximum(self.raw_at_units(U), self.floor)

    def __call__(self, theta: ControllerParams) -> float:
        return float(self.at_units(theta.to_unit()[None, :])[0])

    @property
    def surface_hash(self) -> str:
        digest = hashlib.sha256(self.source_hash.encode())
        digest.update(np.int64(self.seed % 2 ** 63).tobytes())
        digest.update(np.ascontiguousarray(self._values, dtype=np.float64).tobytes())
        return digest.hexdigest()

    def manifest(self) -> Dict[str, object]:
        return {
            "axes": {"wavelength_nodes_unit": list(self.wavelength_nodes), "duty_nodes_unit": list(self.duty_nodes)},
            "seed": self.seed,
            "noise_std": self.noise_std,
            "optimum": {
                "wavelength_um": self.theta_opt.wavelength_um if self.theta_opt else None,
                "duty_cycle_pct": self.theta_opt.duty_cycle_pct if self.theta_opt else None,
                "cost": self.j_opt,
            },
            "floor": self.floor,
            "source_hash": self.source_hash,
            "surface_hash": self.surface_hash,
            "spline": "natural tensor-product cubic",
            "noise_model": "homoscedastic gaussian, 3x3 mean-filtered",
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True)


def _to_unit_axis(values: np.ndarray, bounds: Tuple[float, float]) -> np.ndarray:
    return (values - bounds[0]) / (bounds[1] - bounds[0])


def prepare_grid(g: GridData) -> GridData:
    """Fill-in followed by smoothing, the deterministic part of surface construction."""
    return smooth(fill_missing(g))


def build_surface(grid: GridData, seed: int, noise_std: Optional[float] = None) -> CostSurface:
    """Noisy spline surface from a complete grid, with its optimum located.

    Each cell is resampled with i.i.d. Gaussian noise of ``noise_std`` before
    the mean filter, so the nodes carry ``smooth(noise)`` on top of the
    prepared grid. Both operators are linear, which makes this equal to
    smoothing the resampled filled grid.

    Raises DegenerateSurfaceError when the optimum sits on the cost floor.
    """
    if not grid.is_complete():
        raise ValueError("surface construction needs a complete grid, call prepare_grid first")
    noise_std = grid.noise_std if noise_std is None else noise_std
    nodes_l = _to_unit_axis(grid.wavelengths_um(), WAVELENGTH_BOUNDS_UM)
    nodes_d = _to_unit_axis(np.asarray(grid.duty_pcts, dtype=float), DUTY_CYCLE_BOUNDS_PCT)
    values = grid.array()
    if noise_std > 0:
        rng = seeding.generator(seed, seeding.STREAM_SURFACE)
        noise = rng.normal(0.0, noise_std, size=values.shape)
        values = values + smooth(grid.with_values(noise)).array()

    surface = CostSurface(
        wavelength_nodes=tuple(float(v) for v in nodes_l),
        duty_nodes=tuple(float(v) for v in nodes_d),
        node_values=tuple(tuple(float(v) for v in row) for row in values),
        noise_std=noise_std,
        seed=seed,
        source_hash=grid_hash(grid),
    )
    optimum = maximize_on_box(lambda U: -surface.raw_at_units(np.clip(U, 0.0, 1.0)), shape=FINE_GRID_SHAPE, n_starts=N_OPTIMUM_STARTS)
    j_opt = max(-optimum.value, COST_FLOOR)
    if j_opt <= COST_FLOOR:
        raise DegenerateSurfaceError(f"surface for seed {seed} reaches the cost floor at its optimum")
    return surface.model_copy(update={"theta_opt": ControllerParams.from_unit(optimum.u), "j_opt": j_opt})


def build_surface_with_retry(grid: GridData, seed_words: Tuple[int, ...], max_attempts: int = MAX_RESAMPLE_ATTEMPTS) -> CostSurface:
    """Build from ``seed_words + (attempt,)``, moving to the next attempt on a degenerate surface."""
    for attempt in range(max_attempts):
        seed = seeding.derive(*seed_words, attempt)
        try:
            return build_surface(grid, seed)
        except DegenerateSurfaceError as e:
            logger.warning("%s; resampling (attempt %d)", e, attempt + 1)
    raise DegenerateSurfaceError(f"no usable surface after {max_attempts} attempts for seed {seed_words}")


def normalized_regret(surface: CostSurface, theta_star: ControllerParams) -> float:
    """Relative excess cost of ``theta_star`` over the surface optimum."""
    if surface.j_opt is None:
        raise ValueError("surface has no located optimum")
    return max((surface(theta_star) - surface.j_opt) / surface.j_opt, 0.0)


def containing_cell(surface: CostSurface, theta: ControllerParams) -> Tuple[int, int]:
    """Index of the grid node nearest to ``theta`` along each axis."""
    u = theta.to_unit()
    return (
        int(np.argmin(np.abs(np.asarray(surface.wavelength_nodes) - u[0]))),
        int(np.argmin(np.abs(np.asarray(surface.duty_nodes) - u[1]))),
    )


def lowest_cells(grid: GridData, k: int) -> List[Tuple[int, int]]:
    A = grid.array()
    order = np.argsort(A.ravel(), kind="stable")[:k]
    return [tuple(int(v) for v in np.unravel_index(idx, A.shape)) for idx in order]
