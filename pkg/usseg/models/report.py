from typing import List, Optional

from pydantic import BaseModel, Field

from usseg.models.defect import DefectShape


class StageDetection(BaseModel):
    """Detection counts for one processing stage (forward, backward, combined, final)."""
    stage: str
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)
    accuracy: float  # 100 * tp / (tp + fp)


class DefectResult(BaseModel):
    id: int
    shape: DefectShape
    true_width_mm: float
    detected: bool
    measured_width_mm: Optional[float] = None
    equivalent_diameter_mm: Optional[float] = None
    sizing_error_mm: Optional[float] = None  # measured - true
    six_db_width_mm: Optional[float] = None
    in_plane_mm: Optional[float] = None
    true_depth_mm: float
    measured_depth_mm: Optional[float] = None
    depth_error_mm: Optional[float] = None  # circles only


class SizingAggregate(BaseModel):
    width_mm: str  # true width group, or "mean" over all groups
    mae_mm: float
    std_mm: float
    n: int


class EvalReport(BaseModel):
    sample: str
    confidence: Optional[float] = None
    filter_size: Optional[int] = None
    detection: List[StageDetection] = []
    defects: List[DefectResult] = []
    sizing: List[SizingAggregate] = []

    def stage(self, name: str) -> StageDetection:
        for row in self.detection:
            if row.stage == name:
                return row
        raise KeyError(name)


class CalibrationResult(BaseModel):
    """Oversize offset from a calibration sample and its effect on held-out samples."""
    offset_mm: float
    uncorrected_mae_mm: float
    corrected_mae_mm: float
    n: int
