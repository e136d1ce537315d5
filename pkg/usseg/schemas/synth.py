from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from usseg.models.defect import DefectRecord
from usseg.models.volume import AxisCalib


class StepSpec(BaseModel):
    """Frames [frame_start, frame_stop) have the given plate thickness."""
    model_config = ConfigDict(extra="forbid")

    frame_start: int = Field(ge=0)
    frame_stop: int = Field(gt=0)
    thickness_mm: float = Field(gt=0)

    @model_validator(mode="after")
    def check_range(self):
        if self.frame_stop <= self.frame_start:
            raise ValueError("frame_stop must be greater than frame_start")
        return self


class BeamStepSpec(BaseModel):
    """Beams [beam_start, beam_stop) have the given plate thickness over every frame."""
    model_config = ConfigDict(extra="forbid")

    beam_start: int = Field(ge=0)
    beam_stop: int = Field(gt=0)
    thickness_mm: float = Field(gt=0)

    @model_validator(mode="after")
    def check_range(self):
        if self.beam_stop <= self.beam_start:
            raise ValueError("beam_stop must be greater than beam_start")
        return self


class SynthConfig(BaseModel):
    """Synthetic phased-array scan of a (possibly stepped) plate."""
    model_config = ConfigDict(extra="forbid")

    # Dimensions
    n_frames: int = Field(192, ge=1)
    n_time: int = Field(700, ge=1)
    n_beams: int = Field(48, ge=1)
    calib: AxisCalib = AxisCalib()

    # Geometry
    thickness_mm: float = Field(8.6, gt=0)  # outside any step
    steps: List[StepSpec] = []  # along the scan axis
    beam_steps: List[BeamStepSpec] = []  # along the array axis, win over frame steps

    # Pulse
    center_frequency_hz: float = Field(5e6, gt=0)
    pulse_cycles: float = Field(3.0, gt=0)
    front_wall_amplitude: float = Field(1.0, ge=0)
    back_wall_amplitude: float = Field(0.6, ge=0)
    defect_amplitude: float = Field(1.0, ge=0)  # echo amplitude for reflectivity 1
    attenuation_db_per_mm: float = Field(0.4, ge=0)  # applied two-way

    # Noise
    speckle_amplitude: float = Field(0.02, ge=0)
    speckle_corr_frames: float = Field(0.7, ge=0)  # gaussian sigma, frames
    speckle_corr_time: float = Field(6.0, ge=0)  # gaussian sigma, samples
    speckle_corr_beams: float = Field(0.7, ge=0)  # gaussian sigma, beams
    beam_gain_std: float = Field(0.05, ge=0)  # lognormal sigma
    lateral_spread_mm: float = Field(0.8, ge=0)  # gaussian sigma of the defect echo footprint blur

    defects: List[DefectRecord] = []
    repeat_echoes: bool = False
    seed: int = 0

    def thickness_at(self, frame: int, beam: Optional[int] = None) -> float:
        if beam is not None:
            for beam_step in self.beam_steps:
                if beam_step.beam_start <= beam < beam_step.beam_stop:
                    return beam_step.thickness_mm
        for step in self.steps:
            if step.frame_start <= frame < step.frame_stop:
                return step.thickness_mm
        return self.thickness_mm

    def thickness_map(self) -> np.ndarray:
        """Plate thickness in mm for every (frame, beam) position."""
        return np.array([[self.thickness_at(f, b) for b in range(self.n_beams)] for f in range(self.n_frames)])
