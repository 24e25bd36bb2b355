from acquisition.base_acquisition import AcquisitionConfig, AcquisitionKind, BaseAcquisition, Incumbent
from acquisition.box_maximizer import acq_value, build_acquisition, find_incumbent, maximize_acq, maximize_on_box
from acquisition.entropy_search import EntropySearch, es_score
from acquisition.improvement import (
    ExpectedImprovement,
    ProbabilityOfImprovement,
    RandomSearch,
    expected_improvement,
    probability_of_improvement,
)

__all__ = [
    "AcquisitionConfig", "AcquisitionKind", "BaseAcquisition", "Incumbent", "acq_value",
    "build_acquisition", "find_incumbent", "maximize_acq", "maximize_on_box", "EntropySearch",
    "es_score", "ExpectedImprovement", "ProbabilityOfImprovement", "RandomSearch",
    "expected_improvement", "probability_of_improvement",
]
