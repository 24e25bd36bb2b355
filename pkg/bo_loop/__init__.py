from bo_loop.config import BoConfig, GpSettings, HyperMode, SignalVariance
from bo_loop.optimizer import BayesianOptimizer, OptimizerState, Phase, ask, incumbent, tell
from bo_loop.run_log import RunLog, RunRecord
from bo_loop.state_store import BaseStateStore, JsonFileStateStore, ask_persisted, load_optimizer, tell_persisted

__all__ = [
    "BoConfig", "GpSettings", "HyperMode", "SignalVariance", "BayesianOptimizer", "OptimizerState",
    "Phase", "ask", "incumbent", "tell", "RunLog", "RunRecord", "BaseStateStore", "JsonFileStateStore",
    "ask_persisted", "load_optimizer", "tell_persisted",
]
