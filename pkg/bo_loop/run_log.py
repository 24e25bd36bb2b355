"""Per-iteration records of an optimizer run and their JSON-lines form."""
import os
import tempfile
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from common.exceptions import DataFormatError
from gp_core.hyperparams import ControllerParams, Hyperparams


class RunRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int = Field(ge=1)
    theta: ControllerParams
    observed_cost: float
    hyperparams: Hyperparams = Field(description="Hyperparameters in effect after this observation.")
    incumbent_theta: ControllerParams
    incumbent_mean: float
    wall_time_s: Optional[float] = None
    regret: Optional[float] = Field(default=None, description="Normalized regret of the incumbent, benchmark runs only.")
    surface_hash: Optional[str] = None


class RunLog(BaseModel):
    model_config = ConfigDict(frozen=True)

    records: Tuple[RunRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: RunRecord) -> "RunLog":
        expected = len(self.records) + 1
        if record.iteration != expected:
            raise ValueError(f"run log expects iteration {expected}, got {record.iteration}")
        return RunLog(records=self.records + (record,))

    def to_jsonl(self, include_wall_time: bool = True) -> str:
        exclude = None if include_wall_time else {"wall_time_s"}
        return "".join(r.model_dump_json(exclude=exclude, exclude_none=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "RunLog":
        log = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                log = log.append(RunRecord.model_validate_json(line))
            except (ValidationError, ValueError) as e:
                raise DataFormatError(f"run log line {lineno}: {e}") from e
        return log

    def write(self, path: Union[str, Path], include_wall_time: bool = True) -> None:
        atomic_write_text(Path(path), self.to_jsonl(include_wall_time))

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunLog":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise DataFormatError(f"cannot read run log {path}: {e}") from e
        return cls.from_jsonl(text)


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temporary sibling and rename, so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
