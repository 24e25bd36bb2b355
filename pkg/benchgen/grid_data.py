"""Gridded cost observations: CSV I/O, the default plant-derived grid, fill-in and smoothing."""
import io
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from common import seeding
from common.exceptions import DataFormatError, FillError
from controller_sim.plant import PlantSpec
from gp_core.hyperparams import ControllerParams
from tools import pixels_to_micrometers

logger = logging.getLogger(__name__)

DEFAULT_WAVELENGTHS_PX: Tuple[float, ...] = tuple(float(v) for v in range(200, 801, 50))
DEFAULT_DUTY_PCTS: Tuple[float, ...] = tuple(float(v) for v in range(20, 51, 5))
DEFAULT_OBSERVED_CELLS = 56
DEFAULT_NOISE_STD = 0.1
MIN_OBSERVED_FRACTION = 0.5
MIN_PER_LINE = 2
MAX_MASK_ATTEMPTS = 1000
CSV_COLUMNS = ("wavelength_px", "duty_pct", "cost")


def _strictly_increasing(axis) -> bool:
    return len(axis) >= 2 and bool(np.all(np.diff(np.asarray(axis, dtype=float)) > 0))


class GridData(BaseModel):
    """Cost on a wavelength x duty-cycle lattice; ``None`` marks a missing cell.

    ``values[i][j]`` belongs to ``wavelengths_px[i]`` and ``duty_pcts[j]``.
    """

    model_config = ConfigDict(frozen=True)

    wavelengths_px: Tuple[float, ...] = DEFAULT_WAVELENGTHS_PX
    duty_pcts: Tuple[float, ...] = DEFAULT_DUTY_PCTS
    values: Tuple[Tuple[Optional[float], ...], ...]
    noise_std: float = Field(default=DEFAULT_NOISE_STD, ge=0, description="Observation noise of each cell (cost units).")

    @model_validator(mode="after")
    def _layout(self) -> "GridData":
        if not (_strictly_increasing(self.wavelengths_px) and _strictly_increasing(self.duty_pcts)):
            raise ValueError("grid axes must be strictly increasing with at least two points")
        if len(self.values) != len(self.wavelengths_px) or any(len(r) != len(self.duty_pcts) for r in self.values):
            raise ValueError(f"values must have shape ({len(self.wavelengths_px)}, {len(self.duty_pcts)})")
        observed = sum(v is not None for row in self.values for v in row)
        total = len(self.wavelengths_px) * len(self.duty_pcts)
        if observed < MIN_OBSERVED_FRACTION * total:
            raise ValueError(f"only {observed} of {total} cells observed, need at least half")
        return self

    @classmethod
    def from_array(cls, values: np.ndarray, **kwargs) -> "GridData":
        rows = tuple(tuple(None if np.isnan(v) else float(v) for v in row) for row in np.asarray(values, dtype=float))
        return cls(values=rows, **kwargs)

    def array(self) -> np.ndarray:
        return np.array([[np.nan if v is None else v for v in row] for row in self.values], dtype=float)

    def observed_mask(self) -> np.ndarray:
        return ~np.isnan(self.array())

    def is_complete(self) -> bool:
        return bool(self.observed_mask().all())

    def with_values(self, values: np.ndarray) -> "GridData":
        return GridData.from_array(values, wavelengths_px=self.wavelengths_px, duty_pcts=self.duty_pcts, noise_std=self.noise_std)

    def transposed(self) -> "GridData":
        """Axes swapped; only meaningful for the symmetric fill/smooth operators."""
        return GridData.from_array(
            self.array().T, wavelengths_px=self.duty_pcts, duty_pcts=self.wavelengths_px, noise_std=self.noise_std,
        )

    def wavelengths_um(self) -> np.ndarray:
        return np.array([pixels_to_micrometers(v) for v in self.wavelengths_px])

    def node_controller(self, i: int, j: int) -> ControllerParams:
        return ControllerParams(wavelength_um=float(self.wavelengths_um()[i]), duty_cycle_pct=self.duty_pcts[j])

    def to_csv(self) -> str:
        A = self.array()
        rows = [
            (self.wavelengths_px[i], self.duty_pcts[j], A[i, j])
            for i in range(A.shape[0]) for j in range(A.shape[1]) if not np.isnan(A[i, j])
        ]
        return pd.DataFrame(rows, columns=list(CSV_COLUMNS)).to_csv(index=False)


def parse_grid_csv(
    text: str,
    wavelengths_px: Tuple[float, ...] = DEFAULT_WAVELENGTHS_PX,
    duty_pcts: Tuple[float, ...] = DEFAULT_DUTY_PCTS,
    noise_std: float = DEFAULT_NOISE_STD,
) -> GridData:
    try:
        frame = pd.read_csv(io.StringIO(text), float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"unreadable grid CSV: {e}") from e
    if tuple(frame.columns) != CSV_COLUMNS:
        raise DataFormatError(f"grid CSV header must be {','.join(CSV_COLUMNS)}")
    values = np.full((len(wavelengths_px), len(duty_pcts)), np.nan)
    wl_index = {float(v): i for i, v in enumerate(wavelengths_px)}
    duty_index = {float(v): j for j, v in enumerate(duty_pcts)}
    for row in frame.itertuples(index=False):
        i, j = wl_index.get(float(row.wavelength_px)), duty_index.get(float(row.duty_pct))
        if i is None or j is None:
            raise DataFormatError(f"cell ({row.wavelength_px}, {row.duty_pct}) is not on the grid")
        if not np.isnan(values[i, j]):
            raise DataFormatError(f"cell ({row.wavelength_px}, {row.duty_pct}) listed twice")
        values[i, j] = float(row.cost)
    try:
        return GridData.from_array(values, wavelengths_px=wavelengths_px, duty_pcts=duty_pcts, noise_std=noise_std)
    except ValueError as e:
        raise DataFormatError(f"invalid grid: {e}") from e


def read_grid_csv(path: Union[str, Path], **kwargs) -> GridData:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataFormatError(f"cannot read grid {path}: {e}") from e
    return parse_grid_csv(text, **kwargs)


def _observation_mask(shape: Tuple[int, int], n_observed: int, mask_seed: int) -> np.ndarray:
    n_cells = shape[0] * shape[1]
    for attempt in range(MAX_MASK_ATTEMPTS):
        rng = seeding.generator(mask_seed, seeding.STREAM_MASK, attempt)
        mask = np.zeros(n_cells, dtype=bool)
        mask[rng.choice(n_cells, size=n_observed, replace=False)] = True
        mask = mask.reshape(shape)
        if mask.sum(axis=0).min() >= MIN_PER_LINE and mask.sum(axis=1).min() >= MIN_PER_LINE:
            return mask
    raise FillError(f"no mask with {n_observed} cells covers every row and column after {MAX_MASK_ATTEMPTS} attempts")


def default_grid(
    plant: Optional[PlantSpec] = None,
    v_star: float = 3.0,
    n_observed: int = DEFAULT_OBSERVED_CELLS,
    mask_seed: int = 0,
    noise_std: float = DEFAULT_NOISE_STD,
) -> GridData:
    """Plant cost at the default lattice with a seeded subset of cells kept as observed."""
    plant = plant or PlantSpec()
    template = GridData(values=tuple(tuple(0.0 for _ in DEFAULT_DUTY_PCTS) for _ in DEFAULT_WAVELENGTHS_PX))
    costs = np.array([
        [plant.cost(template.node_controller(i, j), v_star) for j in range(len(DEFAULT_DUTY_PCTS))]
        for i in range(len(DEFAULT_WAVELENGTHS_PX))
    ])
    mask = _observation_mask(costs.shape, n_observed, mask_seed)
    return GridData.from_array(np.where(mask, costs, np.nan), noise_std=noise_std)


def _line_estimate(coords: np.ndarray, line: np.ndarray, k: int) -> Tuple[Optional[float], List[Tuple[int, float]]]:
    """Two-sided linear interpolation at index k of one grid line, else its nearest observed cells."""
    observed = np.flatnonzero(~np.isnan(line))
    below, above = observed[observed < k], observed[observed > k]
    if below.size and above.size:
        lo, hi = below[-1], above[0]
        w = (coords[k] - coords[lo]) / (coords[hi] - coords[lo])
        return (1.0 - w) * line[lo] + w * line[hi], []
    nearest = [(abs(int(idx) - k), float(line[idx])) for idx in observed]
    return None, nearest


def fill_missing(g: GridData) -> GridData:
    """Fill missing cells from originally observed cells only.

    A cell is the mean of the linear interpolations available along each axis
    between its nearest observed neighbours on both sides. Where neither axis
    brackets the cell, the nearest observed value along either axis is used
    (tied values averaged).
    """
    A = g.array()
    if not np.isnan(A).any():
        return g
    wl = np.asarray(g.wavelengths_px, dtype=float)
    duty = np.asarray(g.duty_pcts, dtype=float)
    out = A.copy()
    for i, j in zip(*np.nonzero(np.isnan(A))):
        est_wl, near_wl = _line_estimate(wl, A[:, j], i)
        est_duty, near_duty = _line_estimate(duty, A[i, :], j)
        estimates = [e for e in (est_wl, est_duty) if e is not None]
        if estimates:
            out[i, j] = float(np.mean(estimates))
            continue
        nearest = near_wl + near_duty
        if not nearest:
            raise FillError(f"cell ({g.wavelengths_px[i]}, {g.duty_pcts[j]}) has no observed cell in its row or column")
        d_min = min(d for d, _ in nearest)
        out[i, j] = float(np.mean([v for d, v in nearest if d == d_min]))
    logger.debug("filled %d missing cells", int(np.isnan(A).sum()))
    return g.with_values(out)


def smooth(g: GridData, periodic: bool = False) -> GridData:
    """3x3 mean filter; at the border the window shrinks to its in-grid part unless ``periodic``."""
    A = g.array()
    if np.isnan(A).any():
        raise ValueError("smoothing needs a complete grid, call fill_missing first")
    kernel = np.ones((3, 3))
    if periodic:
        smoothed = signal.convolve2d(A, kernel, mode="same", boundary="wrap") / kernel.size
    else:
        sums = signal.convolve2d(A, kernel, mode="same", boundary="fill", fillvalue=0.0)
        counts = signal.convolve2d(np.ones_like(A), kernel, mode="same", boundary="fill", fillvalue=0.0)
        smoothed = sums / counts
    return g.with_values(smoothed)
