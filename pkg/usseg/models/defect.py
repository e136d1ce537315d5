from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from usseg.models.volume import ScanVolume


class DefectShape(str, Enum):
    CIRCLE = "circle"  # flat-bottom hole
    SQUARE = "square"  # PTFE insert


class DefectRecord(BaseModel):
    """Ground-truth geometry of one artificial defect."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    shape: DefectShape
    width_mm: float = Field(gt=0)  # diameter or side
    center_frame: float  # frame index of the centroid
    center_beam: float  # beam index of the centroid
    depth_mm: float = Field(gt=0)  # from the inspection surface
    reflectivity: float = Field(gt=0, le=1)
    shadowing: float = Field(0.5, ge=0, le=1)  # back-wall amplitude reduction beneath the defect


# Column order of the truth CSV
TRUTH_COLUMNS = ["id", "shape", "width_mm", "center_frame", "center_beam", "depth_mm", "reflectivity", "shadowing"]


@dataclass(frozen=True)
class TruthSet:
    defects: List[DefectRecord]
    mask: Optional[ScanVolume] = None  # voxel-level truth, kind=mask
