"""Binary travelling-stripe light patterns and their frame-dump formats."""
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from common.exceptions import DataFormatError
from gp_core.hyperparams import ControllerParams
from tools import micrometers_to_pixels

DEFAULT_FREQUENCY_HZ = 1.0
DEFAULT_FRAME_SIZE: Tuple[int, int] = (1024, 768)
PACKED_HEADER = struct.Struct("<II")


class LightPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    wavelength_px: float = Field(gt=0, description="Spatial period of the stripes in pixels.")
    duty_cycle_frac: float = Field(gt=0, lt=1, description="Lit fraction of each period.")
    frequency_hz: float = Field(default=DEFAULT_FREQUENCY_HZ, gt=0, description="Temporal frequency of the travelling wave.")
    width_px: int = Field(default=DEFAULT_FRAME_SIZE[0], gt=0)
    height_px: int = Field(default=DEFAULT_FRAME_SIZE[1], gt=0)

    @classmethod
    def from_controller(cls, theta: ControllerParams, **kwargs) -> "LightPattern":
        return cls(
            wavelength_px=micrometers_to_pixels(theta.wavelength_um),
            duty_cycle_frac=theta.duty_cycle_pct / 100.0,
            **kwargs,
        )

    @property
    def speed_px_per_s(self) -> float:
        return self.wavelength_px * self.frequency_hz


def render_pattern(p: LightPattern, t: float) -> np.ndarray:
    """Intensity frame of shape (height, width) with values in {0, 1}.

    Columns are sampled at pixel centres; the lit band of each period is centred
    on phase 0, i.e. a column is lit when the phase folded into [-1/2, 1/2) lies
    within half a duty cycle of zero.
    """
    x = np.arange(p.width_px) + 0.5
    phase = x / p.wavelength_px - p.frequency_hz * t
    folded = np.mod(phase + 0.5, 1.0) - 0.5
    row = (np.abs(folded) <= p.duty_cycle_frac / 2.0).astype(np.uint8)
    return np.broadcast_to(row, (p.height_px, p.width_px)).copy()


def pack_frame(frame: np.ndarray) -> bytes:
    """Little-endian (width, height) header, then 1 bit per pixel, row-major, MSB first."""
    height, width = frame.shape
    return PACKED_HEADER.pack(width, height) + np.packbits(frame.astype(np.uint8).ravel()).tobytes()


def unpack_frame(data: bytes) -> np.ndarray:
    if len(data) < PACKED_HEADER.size:
        raise DataFormatError("packed frame shorter than its header")
    width, height = PACKED_HEADER.unpack_from(data)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=PACKED_HEADER.size))
    if bits.size < width * height:
        raise DataFormatError(f"packed frame truncated: {bits.size} bits for {width}x{height}")
    return bits[: width * height].reshape(height, width)


def to_pgm(frame: np.ndarray) -> str:
    height, width = frame.shape
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in frame)
    return f"P2\n{width} {height}\n1\n{rows}\n"


def export_pattern(p: LightPattern, t: float, out: Union[str, Path], pgm: bool = False) -> np.ndarray:
    frame = render_pattern(p, t)
    out = Path(out)
    out.write_bytes(pack_frame(frame))
    if pgm:
        out.with_suffix(".pgm").write_text(to_pgm(frame))
    return frame
