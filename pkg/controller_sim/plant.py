"""
Simulated microrobot plant.

The true mean speed over the controller box is a baseline plus Gaussian bumps.
Traces follow ``x(t) = V s(t) + a sin(2 pi f t + phi0) + noise`` where the
ramp ``s`` has slope ``1 - (1 - t/T)^p`` during the transient of duration
``T`` and slope 1 afterwards, so past ``T`` the motion is exactly linear.
"""
import logging
import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from acquisition.box_maximizer import maximize_on_box
from common import seeding
from gp_core.hyperparams import ControllerParams, units_to_physical
from tools import bodylength_percent_to_speed
from velocity.movement_fit import cost_from_speed
from velocity.traces import DEFAULT_BODYLENGTH_UM, DEFAULT_FRAME_RATE_HZ, TrackingTrace

logger = logging.getLogger(__name__)

MIN_DURATION_S = 4.0
DEFAULT_DURATION_S = 30.0


class SpeedBump(BaseModel):
    model_config = ConfigDict(frozen=True)

    wavelength_um: float
    duty_cycle_pct: float
    width_wavelength_um: float = Field(gt=0)
    width_duty_cycle_pct: float = Field(gt=0)
    height: float = Field(description="Peak speed added at the bump centre (%BL/s).")


DEFAULT_BUMPS = (
    SpeedBump(wavelength_um=380.0, duty_cycle_pct=43.0, width_wavelength_um=140.0, width_duty_cycle_pct=6.0, height=1.8),
    SpeedBump(wavelength_um=645.0, duty_cycle_pct=30.0, width_wavelength_um=90.0, width_duty_cycle_pct=4.0, height=0.6),
)


class PlantSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    baseline_speed: float = Field(default=0.4, description="Speed far from every bump (%BL/s).")
    bumps: Tuple[SpeedBump, ...] = DEFAULT_BUMPS
    amplitude_um_at_full: float = Field(default=4.0, ge=0, description="Oscillation amplitude at 50% duty cycle.")
    noise_std_um: float = Field(default=2.0, ge=0)
    bodylength_um: float = Field(default=DEFAULT_BODYLENGTH_UM, gt=0)
    transient_duration_s: float = Field(default=2.0, ge=0)
    transient_shape: float = Field(default=2.0, gt=0, description="Exponent of the ramp's approach to full speed.")
    frequency_hz: float = Field(default=1.0, gt=0)
    frame_rate_hz: float = Field(default=DEFAULT_FRAME_RATE_HZ, gt=0)

    def speed_at_units(self, U: np.ndarray) -> np.ndarray:
        P = units_to_physical(U)
        speed = np.full(P.shape[0], self.baseline_speed)
        for bump in self.bumps:
            z2 = ((P[:, 0] - bump.wavelength_um) / bump.width_wavelength_um) ** 2
            z2 += ((P[:, 1] - bump.duty_cycle_pct) / bump.width_duty_cycle_pct) ** 2
            speed += bump.height * np.exp(-0.5 * z2)
        return speed

    def speed(self, theta: ControllerParams) -> float:
        """True mean speed V(theta) in %BL/s."""
        return float(self.speed_at_units(theta.to_unit()[None, :])[0])

    def amplitude(self, theta: ControllerParams) -> float:
        return self.amplitude_um_at_full * theta.duty_cycle_pct / 50.0

    def cost(self, theta: ControllerParams, v_star: float) -> float:
        return cost_from_speed(self.speed(theta), v_star)

    def ramp(self, t: np.ndarray) -> np.ndarray:
        """Integrated start-up speed profile ``s(t)``.

        The transient is a finite polynomial ramp rather than an exponential
        saturation: the slope ``1 - (1 - t/T)^p`` reaches 1 exactly at ``T``
        and stays there, so ``s(t) = t - T / (p + 1)`` for ``t >= T``.
        """
        T, p =self.transient_duration_s, self.transient_shape
        if T == 0:
            return np.asarray(t, dtype=float)
        t = np.asarray(t, dtype=float)
        inside = 1.0 - np.clip(t / T, 0.0, 1.0)
        return t - T / (p + 1.0) * (1.0 - inside ** (p + 1.0))


def plant_optimum(spec: PlantSpec) -> Tuple[ControllerParams, float]:
    """Fastest controller of the plant and its speed."""
    optimum = maximize_on_box(spec.speed_at_units)
    return ControllerParams.from_unit(optimum.u), optimum.value


def simulate_trace(spec: PlantSpec, theta: ControllerParams, duration: float = DEFAULT_DURATION_S, seed: int = 0) -> TrackingTrace:
    if duration < MIN_DURATION_S:
        raise ValueError(f"trace duration must be at least {MIN_DURATION_S} s, got {duration}")
    rng = seeding.generator(seed, seeding.STREAM_PLANT)
    n = int(math.floor(duration * spec.frame_rate_hz + 1e-9)) + 1
    t = np.arange(n) / spec.frame_rate_hz
    phase0 = rng.uniform(-math.pi, math.pi)
    velocity_um = bodylength_percent_to_speed(spec.speed(theta), spec.bodylength_um)
    x = velocity_um * spec.ramp(t) + spec.amplitude(theta) * np.sin(2.0 * math.pi * spec.frequency_hz * t + phase0)
    if spec.noise_std_um > 0:
        x = x + rng.normal(0.0, spec.noise_std_um, size=n)
    return TrackingTrace.from_arrays(t, x, frame_rate_hz=spec.frame_rate_hz, bodylength_um=spec.bodylength_um)
