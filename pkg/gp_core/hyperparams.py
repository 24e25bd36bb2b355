"""Value types shared by the GP layer: controller box, hyperparameters, priors and data."""
import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from common.exceptions import DataFormatError, ParameterDomainError

WAVELENGTH_BOUNDS_UM: Tuple[float, float] = (258.0, 1032.0)
DUTY_CYCLE_BOUNDS_PCT: Tuple[float, float] = (20.0, 50.0)
AXES: Tuple[str, str] = ("wavelength", "duty_cycle")

# Estimates used to build the default priors, in %BL/s unless noted.
DEFAULT_MEAN_CONST = 2.0
DEFAULT_NOISE_STD = 0.1
DEFAULT_LENGTH_SCALE = 0.25  # normalized units, a quarter of each axis
DEFAULT_RQ_ALPHA = 2.0
SHORT_LENGTH_SCALE = 0.125
PRIOR_STD_RATIO = 0.25


class KernelKind(str, Enum):
    SE = "SE"
    RQ = "RQ"
    M32 = "M32"
    M52 = "M52"
    TWO_MAT = "2Mat"


class ControllerParams(BaseModel):
    """A light-pattern controller: spatial wavelength and duty cycle."""

    model_config = ConfigDict(frozen=True)

    wavelength_um: float = Field(description="Spatial wavelength of the stripe pattern in micrometers.")
    duty_cycle_pct: float = Field(description="Illuminated fraction of each wavelength, in percent.")

    @model_validator(mode="after")
    def _inside_box(self) -> "ControllerParams":
        lo, hi = WAVELENGTH_BOUNDS_UM
        if not lo <= self.wavelength_um <= hi:
            raise ParameterDomainError(f"wavelength {self.wavelength_um} um outside [{lo}, {hi}]")
        lo, hi = DUTY_CYCLE_BOUNDS_PCT
        if not lo <= self.duty_cycle_pct <= hi:
            raise ParameterDomainError(f"duty cycle {self.duty_cycle_pct} % outside [{lo}, {hi}]")
        return self

    def to_unit(self) -> np.ndarray:
        return np.array([
            (self.wavelength_um - WAVELENGTH_BOUNDS_UM[0]) / (WAVELENGTH_BOUNDS_UM[1] - WAVELENGTH_BOUNDS_UM[0]),
            (self.duty_cycle_pct - DUTY_CYCLE_BOUNDS_PCT[0]) / (DUTY_CYCLE_BOUNDS_PCT[1] - DUTY_CYCLE_BOUNDS_PCT[0]),
        ])

    @classmethod
    def from_unit(cls, u) -> "ControllerParams":
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return cls(
            wavelength_um=float(WAVELENGTH_BOUNDS_UM[0] + u[0] * (WAVELENGTH_BOUNDS_UM[1] - WAVELENGTH_BOUNDS_UM[0])),
            duty_cycle_pct=float(DUTY_CYCLE_BOUNDS_PCT[0] + u[1] * (DUTY_CYCLE_BOUNDS_PCT[1] - DUTY_CYCLE_BOUNDS_PCT[0])),
        )

    @classmethod
    def parse(cls, text: str) -> "ControllerParams":
        """Parse ``"<wavelength_um>,<duty_pct>"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise DataFormatError(f"expected '<wavelength_um>,<duty_pct>', got {text!r}")
        try:
            wavelength, duty = float(parts[0]), float(parts[1])
        except ValueError as e:
            raise DataFormatError(f"non-numeric controller {text!r}") from e
        return cls(wavelength_um=wavelength, duty_cycle_pct=duty)

    def format(self) -> str:
        return f"{self.wavelength_um!r},{self.duty_cycle_pct!r}"


def units_to_physical(U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(U)
    lo = np.array([WAVELENGTH_BOUNDS_UM[0], DUTY_CYCLE_BOUNDS_PCT[0]])
    hi = np.array([WAVELENGTH_BOUNDS_UM[1], DUTY_CYCLE_BOUNDS_PCT[1]])
    return lo + U * (hi - lo)


class Hyperparams(BaseModel):
    """GP hyperparameters.

    Length scales are in normalized box units. For the 2Mat kernel
    ``length_scales``/``signal_std`` belong to the Matern-5/2 summand and the
    ``*_m32`` fields to the Matern-3/2 summand.
    """

    model_config = ConfigDict(frozen=True)

    kernel: KernelKind
    length_scales: Tuple[float, float] = Field(description="ARD length scales (normalized units).")
    signal_std: float = Field(gt=0, description="Signal standard deviation (%BL/s).")
    noise_std: float = Field(gt=0, description="Observation noise standard deviation (%BL/s).")
    mean_const: float = Field(ge=0, description="Constant prior mean (%BL/s).")
    rq_alpha: Optional[float] = Field(default=None, gt=0, description="RQ shape parameter.")
    length_scales_m32: Optional[Tuple[float, float]] = None
    signal_std_m32: Optional[float] = Field(default=None, gt=0)

    @field_validator("length_scales", "length_scales_m32")
    @classmethod
    def _positive_lengths(cls, v):
        if v is not None and any(not (ls > 0 and math.isfinite(ls)) for ls in v):
            raise ValueError(f"length scales must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def _complete_for_kind(self) -> "Hyperparams":
        if self.kernel == KernelKind.RQ and self.rq_alpha is None:
            raise ValueError("RQ kernel requires rq_alpha")
        if self.kernel == KernelKind.TWO_MAT and (self.length_scales_m32 is None or self.signal_std_m32 is None):
            raise ValueError("2Mat kernel requires length_scales_m32 and signal_std_m32")
        return self

    @property
    def total_signal_variance(self) -> float:
        var = self.signal_std ** 2
        if self.kernel == KernelKind.TWO_MAT:
            var += self.signal_std_m32 ** 2
        return var

    @classmethod
    def default(
        cls,
        kernel: KernelKind,
        signal_std: float,
        mean_const: float = DEFAULT_MEAN_CONST,
        noise_std: float = DEFAULT_NOISE_STD,
        length_scale: float = DEFAULT_LENGTH_SCALE,
        rq_alpha: float = DEFAULT_RQ_ALPHA,
    ) -> "Hyperparams":
        kernel = KernelKind(kernel)
        if kernel == KernelKind.TWO_MAT:
            # Variance split evenly: smooth long-scale M52 plus short-scale M32.
            half = signal_std / math.sqrt(2.0)
            short = length_scale * SHORT_LENGTH_SCALE / DEFAULT_LENGTH_SCALE
            return cls(
                kernel=kernel, length_scales=(length_scale, length_scale), signal_std=half,
                length_scales_m32=(short, short), signal_std_m32=half,
                noise_std=noise_std, mean_const=mean_const,
            )
        return cls(
            kernel=kernel, length_scales=(length_scale, length_scale), signal_std=signal_std,
            noise_std=noise_std, mean_const=mean_const,
            rq_alpha=rq_alpha if kernel == KernelKind.RQ else None,
        )

    def free_parameters(self) -> Dict[str, float]:
        """Hyperparameters learned by MAP, keyed by their document names."""
        if self.kernel == KernelKind.TWO_MAT:
            return {
                "length_scale.wavelength.m52": self.length_scales[0],
                "length_scale.duty_cycle.m52": self.length_scales[1],
                "signal_std.m52": self.signal_std,
                "length_scale.wavelength.m32": self.length_scales_m32[0],
                "length_scale.duty_cycle.m32": self.length_scales_m32[1],
                "signal_std.m32": self.signal_std_m32,
            }
        params = {
            "length_scale.wavelength": self.length_scales[0],
            "length_scale.duty_cycle": self.length_scales[1],
            "signal_std": self.signal_std,
        }
        if self.kernel == KernelKind.RQ:
            params["rq_alpha"] = self.rq_alpha
        return params

    def with_free_parameters(self, params: Dict[str, float]) -> "Hyperparams":
        if self.kernel == KernelKind.TWO_MAT:
            return self.model_copy(update={
                "length_scales": (params["length_scale.wavelength.m52"], params["length_scale.duty_cycle.m52"]),
                "signal_std": params["signal_std.m52"],
                "length_scales_m32": (params["length_scale.wavelength.m32"], params["length_scale.duty_cycle.m32"]),
                "signal_std_m32": params["signal_std.m32"],
            })
        update = {
            "length_scales": (params["length_scale.wavelength"], params["length_scale.duty_cycle"]),
            "signal_std": params["signal_std"],
        }
        if self.kernel == KernelKind.RQ:
            update["rq_alpha"] = params["rq_alpha"]
        return self.model_copy(update=update)

    def to_document(self) -> Dict[str, object]:
        doc: Dict[str, object] = {"kernel": self.kernel.value}
        doc.update({k: float(v) for k, v in self.free_parameters().items()})
        doc["noise_std"] = float(self.noise_std)
        doc["mean_const"] = float(self.mean_const)
        return doc

    @classmethod
    def from_document(cls, doc: Dict[str, str]) -> "Hyperparams":
        try:
            kernel = KernelKind(doc["kernel"])
            base = dict(kernel=kernel, noise_std=float(doc["noise_std"]), mean_const=float(doc["mean_const"]))
            if kernel == KernelKind.TWO_MAT:
                base.update(
                    length_scales=(float(doc["length_scale.wavelength.m52"]), float(doc["length_scale.duty_cycle.m52"])),
                    signal_std=float(doc["signal_std.m52"]),
                    length_scales_m32=(float(doc["length_scale.wavelength.m32"]), float(doc["length_scale.duty_cycle.m32"])),
                    signal_std_m32=float(doc["signal_std.m32"]),
                )
            else:
                base.update(
                    length_scales=(float(doc["length_scale.wavelength"]), float(doc["length_scale.duty_cycle"])),
                    signal_std=float(doc["signal_std"]),
                )
                if kernel == KernelKind.RQ:
                    base["rq_alpha"] = float(doc["rq_alpha"])
        except (KeyError, ValueError) as e:
            raise DataFormatError(f"incomplete hyperparameter document: {e}") from e
        return cls(**base)


class PriorEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = Field(gt=0)
    std: float = Field(gt=0)

    def log_density(self, value: float) -> float:
        z = (value - self.mean) / self.std
        return -0.5 * z * z - math.log(self.std * math.sqrt(2.0 * math.pi))


class HyperPrior(BaseModel):
    """Gaussian hyperpriors on the natural scale, one per free hyperparameter."""

    model_config = ConfigDict(frozen=True)

    entries: Dict[str, PriorEntry]

    @classmethod
    def from_estimate(cls, hp: Hyperparams, std_ratio: float = PRIOR_STD_RATIO) -> "HyperPrior":
        return cls(entries={
            name: PriorEntry(mean=value, std=value * std_ratio)
            for name, value in hp.free_parameters().items()
        })

    def covers(self, hp: Hyperparams) -> bool:
        return set(hp.free_parameters()) <= set(self.entries)

    def means(self) -> Dict[str, float]:
        return {name: e.mean for name, e in self.entries.items()}


class Observation(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: ControllerParams
    observed_cost: float


class Dataset(BaseModel):
    """Append-only list of evaluated controllers."""

    model_config = ConfigDict(frozen=True)

    observations: Tuple[Observation, ...] = ()

    def __len__(self) -> int:
        return len(self.observations)

    def append(self, theta: ControllerParams, observed_cost: float) -> "Dataset":
        if not math.isfinite(observed_cost):
            raise ValueError(f"observed cost must be finite, got {observed_cost}")
        return Dataset(observations=self.observations + (Observation(theta=theta, observed_cost=float(observed_cost)),))

    def unit_inputs(self) -> np.ndarray:
        if not self.observations:
            return np.zeros((0, 2))
        return np.vstack([o.theta.to_unit() for o in self.observations])

    def costs(self) -> np.ndarray:
        return np.array([o.observed_cost for o in self.observations], dtype=float)

    def thetas(self) -> List[ControllerParams]:
        return [o.theta for o in self.observations]


class PosteriorStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float = Field(ge=0)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)
