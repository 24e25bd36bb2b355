"""1-D tracking traces and their CSV form (``t_s,x_um`` plus ``# key = value`` metadata lines)."""
import io
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from common.exceptions import DataFormatError

DEFAULT_FRAME_RATE_HZ = 10.0
DEFAULT_BODYLENGTH_UM = 300.0
COLUMNS = ("t_s", "x_um")


class TrackingTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_s: Tuple[float, ...] = Field(description="Sample times in seconds, strictly increasing.")
    x_um: Tuple[float, ...] = Field(description="Position along the track in micrometers.")
    frame_rate_hz: float = Field(default=DEFAULT_FRAME_RATE_HZ, gt=0)
    bodylength_um: float = Field(default=DEFAULT_BODYLENGTH_UM, gt=0)

    @model_validator(mode="after")
    def _consistent(self) -> "TrackingTrace":
        if len(self.t_s) != len(self.x_um):
            raise ValueError(f"{len(self.t_s)} timestamps but {len(self.x_um)} positions")
        t = np.asarray(self.t_s)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(self.x_um))):
            raise ValueError("trace contains non-finite samples")
        return self

    @classmethod
    def from_arrays(cls, t, x, **metadata) -> "TrackingTrace":
        return cls(t_s=tuple(float(v) for v in t), x_um=tuple(float(v) for v in x), **metadata)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.t_s, dtype=float), np.asarray(self.x_um, dtype=float)

    def __len__(self) -> int:
        return len(self.t_s)

    def to_csv(self) -> str:
        t, x = self.arrays()
        header = f"# bodylength_um = {self.bodylength_um!r}\n# frame_rate_hz = {self.frame_rate_hz!r}\n"
        return header + pd.DataFrame({"t_s": t, "x_um": x}).to_csv(index=False)

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv())


def _metadata(text: str) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("#"):
            continue
        body = line.lstrip("#").strip()
        for sep in ("=", ":"):
            if sep in body:
                key, value = body.split(sep, 1)
                meta[key.strip()] = value.strip()
                break
    return meta


def parse_trace_csv(text: str) -> TrackingTrace:
    meta = _metadata(text)
    try:
        frame = pd.read_csv(io.StringIO(text), comment="#", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"unreadable trace CSV: {e}") from e
    if tuple(frame.columns) != COLUMNS:
        raise DataFormatError(f"trace CSV header must be {','.join(COLUMNS)}, got {','.join(map(str, frame.columns))}")
    extra = {}
    try:
        if "bodylength_um" in meta:
            extra["bodylength_um"] = float(meta["bodylength_um"])
        if "frame_rate_hz" in meta:
            extra["frame_rate_hz"] = float(meta["frame_rate_hz"])
        return TrackingTrace.from_arrays(
            frame["t_s"].to_numpy(dtype=float), frame["x_um"].to_numpy(dtype=float), **extra
        )
    except ValueError as e:
        raise DataFormatError(f"invalid trace: {e}") from e


def read_trace_csv(path: Union[str, Path]) -> TrackingTrace:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataFormatError(f"cannot read trace {path}: {e}") from e
    return parse_trace_csv(text)
