"""Run configuration for one ask/tell optimizer."""
from enum import Enum
from typing import Dict

from pydantic import BaseModel, ConfigDict, Field, model_validator

from acquisition.base_acquisition import AcquisitionConfig, AcquisitionKind
from common.exceptions import DataFormatError, UnsupportedConfigurationError
from common.kv_document import dump_kv, load_kv, parse_kv
from gp_core.hyperparams import (
    DEFAULT_LENGTH_SCALE,
    DEFAULT_MEAN_CONST,
    DEFAULT_NOISE_STD,
    DEFAULT_RQ_ALPHA,
    ControllerParams,
    HyperPrior,
    Hyperparams,
    KernelKind,
)
from tools import is_optimistic_signal_std

DEFAULT_SIGMA_F1 = 1.5
DEFAULT_SIGMA_F2 = 0.75
DEFAULT_BUDGET = 20
INITIAL_THETA = ControllerParams(wavelength_um=645.0, duty_cycle_pct=30.0)


class SignalVariance(str, Enum):
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"

    @property
    def short(self) -> str:
        return "f1" if self is SignalVariance.OPTIMISTIC else "f2"


class HyperMode(str, Enum):
    FIXED = "fixed"
    LEARNED = "learned"


class GpSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_const: float = Field(default=DEFAULT_MEAN_CONST, ge=0, description="Constant prior mean (%BL/s).")
    noise_std: float = Field(default=DEFAULT_NOISE_STD, gt=0, description="Observation noise std (%BL/s).")
    sigma_f1: float = Field(default=DEFAULT_SIGMA_F1, gt=0, description="Optimistic signal std.")
    sigma_f2: float = Field(default=DEFAULT_SIGMA_F2, gt=0, description="Pessimistic signal std.")
    length_scale: float = Field(default=DEFAULT_LENGTH_SCALE, gt=0, description="Length-scale estimate, normalized units.")
    rq_alpha: float = Field(default=DEFAULT_RQ_ALPHA, gt=0)

    @model_validator(mode="after")
    def _optimism(self) -> "GpSettings":
        if not is_optimistic_signal_std(self.mean_const, self.sigma_f1):
            raise ValueError(f"sigma_f1={self.sigma_f1} must exceed mean_const/2={self.mean_const / 2}")
        if self.sigma_f2 >= self.mean_const / 2:
            raise ValueError(f"sigma_f2={self.sigma_f2} must be below mean_const/2={self.mean_const / 2}")
        return self


class BoConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kernel: KernelKind = KernelKind.TWO_MAT
    acquisition: AcquisitionConfig = AcquisitionConfig()
    signal_variance: SignalVariance = SignalVariance.OPTIMISTIC
    hyper_mode: HyperMode = HyperMode.FIXED
    budget: int = Field(default=DEFAULT_BUDGET, ge=1, description="Evaluations per run, the initial one included.")
    initial_theta: ControllerParams = INITIAL_THETA
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    gp: GpSettings = GpSettings()

    def check_supported(self) -> "BoConfig":
        if self.acquisition.kind == AcquisitionKind.ES and self.hyper_mode == HyperMode.LEARNED:
            raise UnsupportedConfigurationError("entropy search with learned hyperparameters is not supported")
        return self

    @property
    def signal_std(self) -> float:
        if self.signal_variance == SignalVariance.OPTIMISTIC:
            return self.gp.sigma_f1
        return self.gp.sigma_f2

    @property
    def label(self) -> str:
        return f"{self.kernel.value}/{self.acquisition.kind.value}/{self.signal_variance.short}/{self.hyper_mode.value}"

    def initial_hyperparams(self) -> Hyperparams:
        return Hyperparams.default(
            self.kernel, self.signal_std,
            mean_const=self.gp.mean_const, noise_std=self.gp.noise_std,
            length_scale=self.gp.length_scale, rq_alpha=self.gp.rq_alpha,
        )

    def hyperprior(self) -> HyperPrior:
        return HyperPrior.from_estimate(self.initial_hyperparams())

    @classmethod
    def from_label(cls, label: str, **kwargs) -> "BoConfig":
        """Build from ``<kernel>/<acq>/<f1|f2>/<fixed|learned>``."""
        parts = label.strip().split("/")
        if len(parts) != 4:
            raise DataFormatError(f"configuration label {label!r} is not <kernel>/<acq>/<f1|f2>/<fixed|learned>")
        kernel, acq, variance, mode = parts
        variances = {v.short: v for v in SignalVariance}
        try:
            acquisition = kwargs.pop("acquisition", AcquisitionConfig())
            config = cls(
                kernel=KernelKind(kernel),
                acquisition=acquisition.model_copy(update={"kind": AcquisitionKind(acq)}),
                signal_variance=variances[variance],
                hyper_mode=HyperMode(mode),
                **kwargs,
            )
        except (KeyError, ValueError) as e:
            raise DataFormatError(f"bad configuration label {label!r}: {e}") from e
        return config.check_supported()

    def to_document(self) -> Dict[str, object]:
        doc: Dict[str, object] = {
            "kernel": self.kernel.value,
            "gp.mean_const": self.gp.mean_const,
            "gp.noise_std": self.gp.noise_std,
            "gp.sigma_f1": self.gp.sigma_f1,
            "gp.sigma_f2": self.gp.sigma_f2,
            "gp.length_scale": self.gp.length_scale,
            "gp.rq_alpha": self.gp.rq_alpha,
        }
        doc.update(self.acquisition.to_document())
        doc.update({
            "signal_variance": self.signal_variance.value,
            "hyper_mode": self.hyper_mode.value,
            "budget": self.budget,
            "initial_theta": self.initial_theta.format(),
            "seed": self.seed,
        })
        return doc

    def dumps(self) -> str:
        return dump_kv(self.to_document())

    @classmethod
    def from_document(cls, doc: Dict[str, str]) -> "BoConfig":
        defaults = cls()
        try:
            gp = GpSettings(
                mean_const=float(doc.get("gp.mean_const", defaults.gp.mean_const)),
                noise_std=float(doc.get("gp.noise_std", defaults.gp.noise_std)),
                sigma_f1=float(doc.get("gp.sigma_f1", defaults.gp.sigma_f1)),
                sigma_f2=float(doc.get("gp.sigma_f2", defaults.gp.sigma_f2)),
                length_scale=float(doc.get("gp.length_scale", defaults.gp.length_scale)),
                rq_alpha=float(doc.get("gp.rq_alpha", defaults.gp.rq_alpha)),
            )
            initial = doc.get("initial_theta")
            config = cls(
                kernel=KernelKind(doc.get("kernel", defaults.kernel.value)),
                acquisition=AcquisitionConfig.from_document(doc),
                signal_variance=SignalVariance(doc.get("signal_variance", defaults.signal_variance.value)),
                hyper_mode=HyperMode(doc.get("hyper_mode", defaults.hyper_mode.value)),
                budget=int(doc.get("budget", defaults.budget)),
                initial_theta=ControllerParams.parse(initial) if initial else defaults.initial_theta,
                seed=int(doc.get("seed", defaults.seed)),
                gp=gp,
            )
        except DataFormatError:
            raise
        except ValueError as e:
            raise DataFormatError(f"invalid run configuration: {e}") from e
        return config.check_supported()

    @classmethod
    def loads(cls, text: str) -> "BoConfig":
        return cls.from_document(parse_kv(text))

    @classmethod
    def load(cls, path) -> "BoConfig":
        return cls.from_document(load_kv(path))
