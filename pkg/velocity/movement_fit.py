"""
Locomotion speed from a tracking trace.

The movement model ``x(t) = V t + b + a sin(2 pi f t + phi)`` is linear in
``(V, b, c1, c2)`` once the gait frequency is known, with
``a sin(2 pi f t + phi) = c1 sin(2 pi f t) + c2 cos(2 pi f t)``. The fit is
therefore a single least-squares solve.
"""
import logging
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from common.exceptions import DegenerateFitError, InsufficientDataError
from tools import speed_to_bodylength_percent
from velocity.traces import TrackingTrace

logger = logging.getLogger(__name__)

DEFAULT_FREQUENCY_HZ = 1.0
DEFAULT_T_CUT_S = 2.0
DEFAULT_V_STAR = 6.0
MIN_SAMPLES = 5
MIN_PERIODS = 2.0


class FitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_m: float = Field(description="Constant speed component in %BL/s.")
    offset_b: float = Field(description="Position offset in micrometers.")
    amplitude_a: float = Field(ge=0, description="Oscillation amplitude in micrometers.")
    phase_phi: float = Field(ge=-math.pi, lt=math.pi, description="Oscillation phase in radians.")
    residual_rms: float = Field(ge=0, description="Root-mean-square residual in micrometers.")
    v_m_stderr: Optional[float] = Field(default=None, description="Least-squares standard error of v_m (%BL/s).")
    covariance: Optional[List[List[float]]] = Field(
        default=None, description="Parameter covariance of (slope um/s, b, c1, c2); informational only.",
    )
    n_samples: int = 0


def _wrap_phase(phi: float) -> float:
    wrapped = (phi + math.pi) % (2.0 * math.pi) - math.pi
    return wrapped if wrapped < math.pi else -math.pi


def fit_movement(
    trace: TrackingTrace,
    f_hz: float = DEFAULT_FREQUENCY_HZ,
    t_cut: float = DEFAULT_T_CUT_S,
) -> FitResult:
    if not f_hz > 0:
        raise ValueError(f"oscillation frequency must be positive, got {f_hz}")
    t_all, x_all = trace.arrays()
    keep = t_all >= t_cut
    t, x = t_all[keep], x_all[keep]
    n = t.size
    if n < MIN_SAMPLES:
        raise InsufficientDataError(f"{n} samples after t_cut={t_cut} s, need at least {MIN_SAMPLES}")
    if (t[-1] - t[0]) * f_hz < MIN_PERIODS * (1.0 - 1e-9):
        raise InsufficientDataError(
            f"trace covers {(t[-1] - t[0]) * f_hz:.2f} oscillation periods after the cutoff, need {MIN_PERIODS:g}"
        )

    w = 2.0 * math.pi * f_hz
    G = np.column_stack([t, np.ones(n), np.sin(w * t), np.cos(w * t)])
    coef, _, rank, _ = np.linalg.lstsq(G, x, rcond=None)
    if rank < G.shape[1]:
        raise DegenerateFitError(f"design matrix has rank {rank} < 4 (frequency {f_hz} Hz aliases on the sample grid)")

    slope, offset, c1, c2 = (float(c) for c in coef)
    residuals = x - G @ coef
    rss = float(residuals @ residuals)
    covariance = None
    stderr = None
    if n > G.shape[1]:
        cov = rss / (n - G.shape[1]) * np.linalg.inv(G.T @ G)
        covariance = cov.tolist()
        stderr = speed_to_bodylength_percent(math.sqrt(max(cov[0, 0], 0.0)), trace.bodylength_um)

    result = FitResult(
        v_m=speed_to_bodylength_percent(slope, trace.bodylength_um),
        offset_b=offset,
        amplitude_a=math.hypot(c1, c2),
        phase_phi=_wrap_phase(math.atan2(c2, c1)),
        residual_rms=math.sqrt(rss / n),
        v_m_stderr=stderr,
        covariance=covariance,
        n_samples=n,
    )
    logger.debug("fitted v_m=%.6g %%BL/s from %d samples (rms %.3g um)", result.v_m, n, result.residual_rms)
    return result


def cost_from_speed(v_m: float, v_star: float = DEFAULT_V_STAR) -> float:
    """Deviation of the measured speed from the desired one."""
    return abs(v_star - v_m)
