from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from usseg.models.volume import PaddingMode

# False-call rates from 1% down to 0.00001%
CONFIDENCE_LEVELS = [0.99, 0.999, 0.9999, 0.99999, 0.999999, 0.9999999]


class SweepMode(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    BOTH = "both"


class Sidedness(str, Enum):
    UPPER = "upper"
    TWO_SIDED = "two-sided"


class InferConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    confidence: float = Field(0.9999999, gt=0, lt=1)
    padding: PaddingMode = PaddingMode.EDGE
    sweep: SweepMode = SweepMode.BOTH
    sidedness: Sidedness = Sidedness.UPPER
    time_downsample: int = Field(10, ge=1)
    min_defect_mm: float = Field(3.0, gt=0)
    connectivity: Literal[4, 8] = 8
    stages: bool = False  # persist forward/backward/combined masks
