from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from usseg.errors import InvariantError


class VolumeKind(str, Enum):
    RF = "rf"
    ENVELOPE = "envelope"
    MASK = "mask"


class PaddingMode(str, Enum):
    EDGE = "edge"
    REFLECT = "reflect"
    ZERO = "zero"


# USV header codes
KIND_CODES = {VolumeKind.RF: 0, VolumeKind.ENVELOPE: 1, VolumeKind.MASK: 2}


class AxisCalib(BaseModel):
    """Physical calibration of the three volume axes."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    scan_step_mm: float = Field(0.8, gt=0)  # length per frame
    beam_pitch_mm: float = Field(0.8, gt=0)  # length per beam
    sample_rate_hz: float = Field(1e8, gt=0)
    velocity_mm_per_us: float = Field(3.0, gt=0)
    front_wall_index: int = Field(40, ge=0)  # time sample used as depth zero; 0 after coarse down-sampling

    @property
    def mm_per_sample(self) -> float:
        """One-way depth covered by one time sample."""
        return 1e6 / self.sample_rate_hz * self.velocity_mm_per_us / 2.0

    def depth_mm(self, t):
        return (np.asarray(t, dtype=np.float64) - self.front_wall_index) * self.mm_per_sample

    def time_index(self, depth_mm: float) -> float:
        return self.front_wall_index + depth_mm / self.mm_per_sample

    def frame_mm(self, f):
        return np.asarray(f, dtype=np.float64) * self.scan_step_mm

    def beam_mm(self, b):
        return np.asarray(b, dtype=np.float64) * self.beam_pitch_mm


@dataclass(frozen=True, eq=False)
class ScanVolume:
    """Frames x time x beams amplitudes. The array is read-only once built."""
    data: np.ndarray
    kind: VolumeKind = VolumeKind.ENVELOPE
    calib: AxisCalib = field(default_factory=AxisCalib)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 3:
            raise InvariantError(f"volume data must be 3D (frames, time, beams), got shape {data.shape}")
        if min(data.shape) < 1:
            raise InvariantError(f"every volume dimension must be >= 1, got {data.shape}")
        kind = VolumeKind(self.kind)
        if not np.all(np.isfinite(data)):
            raise InvariantError("volume contains non-finite values")
        if kind == VolumeKind.ENVELOPE and np.any(data < 0):
            raise InvariantError("envelope volume contains negative values")
        if kind == VolumeKind.MASK and not np.all((data == 0) | (data == 1)):
            raise InvariantError("mask volume values must be exactly 0 or 1")
        if self.calib.front_wall_index >= data.shape[1]:
            raise InvariantError(
                f"front_wall_index {self.calib.front_wall_index} outside time axis of length {data.shape[1]}"
            )
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "kind", kind)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_time(self) -> int:
        return self.data.shape[1]

    @property
    def n_beams(self) -> int:
        return self.data.shape[2]

    def replace(self, data: Optional[np.ndarray] = None, kind: Optional[VolumeKind] = None,
                calib: Optional[AxisCalib] = None) -> "ScanVolume":
        return replace(
            self,
            data=self.data if data is None else data,
            kind=self.kind if kind is None else kind,
            calib=self.calib if calib is None else calib,
        )

    def reversed_frames(self) -> "ScanVolume":
        return self.replace(data=self.data[::-1])