from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from common.exceptions import DataFormatError
from gp_core.gaussian_process import GaussianProcess
from gp_core.hyperparams import ControllerParams

Utility = Callable[[np.ndarray], np.ndarray]


class AcquisitionKind(str, Enum):
    PI = "PI"
    EI = "EI"
    ES = "ES"
    RANDOM = "RANDOM"


class AcquisitionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: AcquisitionKind = AcquisitionKind.EI
    gamma: float = Field(default=0.9, gt=0, le=1, description="Improvement threshold factor on the incumbent mean.")
    es_representer_count: int = Field(default=25, ge=20, description="Representer points for the minimum-location estimate.")
    es_mc_samples: int = Field(default=200, ge=1, description="Joint posterior draws per entropy estimate.")

    def to_document(self) -> Dict[str, object]:
        return {
            "acq.kind": self.kind.value,
            "acq.gamma": self.gamma,
            "acq.es.representers": self.es_representer_count,
            "acq.es.mc_samples": self.es_mc_samples,
        }

    @classmethod
    def from_document(cls, doc: Dict[str, str]) -> "AcquisitionConfig":
        defaults = cls()
        try:
            return cls(
                kind=AcquisitionKind(doc.get("acq.kind", defaults.kind.value)),
                gamma=float(doc.get("acq.gamma", defaults.gamma)),
                es_representer_count=int(doc.get("acq.es.representers", defaults.es_representer_count)),
                es_mc_samples=int(doc.get("acq.es.mc_samples", defaults.es_mc_samples)),
            )
        except ValueError as e:
            raise DataFormatError(f"bad acquisition settings: {e}") from e


class Incumbent(BaseModel):
    """Minimum of the posterior mean over the box."""

    model_config = ConfigDict(frozen=True)

    mu_star: float
    theta_star: ControllerParams


class BaseAcquisition(ABC):
    def __init__(self, config: AcquisitionConfig, seed: int = 0):
        self.config = config
        self.seed = seed

    @property
    def needs_incumbent(self) -> bool:
        return True

    @abstractmethod
    def utility(self, gp: GaussianProcess, incumbent: Incumbent) -> Utility:
        """Return a vectorized utility over unit-box points, larger is better."""

    def evaluate(self, gp: GaussianProcess, U: np.ndarray, incumbent: Incumbent) -> np.ndarray:
        return self.utility(gp, incumbent)(np.atleast_2d(U))

    def propose(self, gp: GaussianProcess, incumbent: Incumbent) -> np.ndarray:
        from acquisition.box_maximizer import maximize_on_box

        return maximize_on_box(self.utility(gp, incumbent)).u
