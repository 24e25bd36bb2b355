import fcntl
import hashlib
import logging
from abc import ABC, abstractmethod
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from pydantic import ValidationError

from bo_loop.config import BoConfig
from bo_loop.optimizer import BayesianOptimizer, OptimizerState
from bo_loop.run_log import atomic_write_text
from common.exceptions import DataFormatError, OptimizerStateError
from gp_core.hyperparams import ControllerParams

logger = logging.getLogger(__name__)

WALL_TIME_FIELDS = {"asked_at": True, "run_log": {"records": {"__all__": {"wall_time_s"}}}}


class BaseStateStore(ABC):
    @abstractmethod
    def exists(self) -> bool:
        """Whether a state has been saved."""
        pass

    @abstractmethod
    def save(self, state: OptimizerState):
        """Persists the optimizer state."""
        pass

    @abstractmethod
    def load(self) -> OptimizerState:
        """Loads the optimizer state saved last."""
        pass


class JsonFileStateStore(BaseStateStore):
    """One JSON document per optimizer, guarded by an advisory lock on a sibling lock file.

    Wall-clock fields (the ask timestamp and per-record wall time) are left out
    unless ``record_wall_time`` is set, so equal sessions give equal files.
    """

    def __init__(self, path: Union[str, Path], record_wall_time: bool = False):
        self.path = Path(path)
        self.record_wall_time = record_wall_time
        self.lock_path = self.path.with_name(self.path.name + ".lock")

    def exists(self) -> bool:
        return self.path.exists()

    @contextmanager
    def locked(self) -> Iterator["JsonFileStateStore"]:
        self.lock_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.lock_path, "a") as handle:
            try:
                fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError as e:
                raise OptimizerStateError(f"state file {self.path} is in use by another process") from e
            try:
                yield self
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def save(self, state: OptimizerState):
        exclude = None if self.record_wall_time else WALL_TIME_FIELDS
        atomic_write_text(self.path, state.model_dump_json(indent=2, exclude=exclude) + "\n")
        logger.debug("saved optimizer state at iteration %d to %s", state.iteration, self.path)

    def load(self) -> OptimizerState:
        if not self.exists():
            raise DataFormatError(f"state file {self.path} does not exist")
        try:
            state = OptimizerState.model_validate_json(self.path.read_text())
        except (OSError, ValidationError, ValueError) as e:
            raise DataFormatError(f"malformed state file {self.path}: {e}") from e
        if len(state.run_log) != state.iteration:
            raise DataFormatError(f"state file {self.path}: run log and dataset disagree")
        return state

    def digest(self) -> Optional[str]:
        if not self.exists():
            return None
        return hashlib.sha256(self.path.read_bytes()).hexdigest()


def ask_persisted(store: JsonFileStateStore, config: Optional[BoConfig] = None) -> ControllerParams:
    """Ask once against a state file, creating the state from ``config`` if there is none yet."""
    with store.locked():
        state = store.load() if store.exists() else OptimizerState.initial(config or BoConfig())
        optimizer = BayesianOptimizer(state=state)
        theta = optimizer.ask()
        store.save(optimizer.state)
    return theta


def tell_persisted(store: JsonFileStateStore, theta: ControllerParams, observed_cost: float) -> OptimizerState:
    """Tell once against a state file; on any error the file is left untouched."""
    with store.locked():
        optimizer = BayesianOptimizer(state=store.load())
        state = optimizer.tell(theta, observed_cost)
        store.save(state)
    return state


def load_optimizer(store: JsonFileStateStore) -> BayesianOptimizer:
    with store.locked():
        return BayesianOptimizer(state=store.load())
