from typing import Annotated, List, Literal

from pydantic import BaseModel, ConfigDict, Field

from usseg.schemas.inference import CONFIDENCE_LEVELS

Confidence = Annotated[float, Field(gt=0, lt=1)]


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    connectivity: Literal[4, 8] = 8
    gate_half_width_mm: float = Field(1.0, gt=0)  # depth gate around each defect for the 6 dB reference
    confidences: List[Confidence] = Field(default_factory=lambda: list(CONFIDENCE_LEVELS), min_length=1)  # confidence-sweep levels
