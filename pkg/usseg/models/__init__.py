from .volume import AxisCalib, PaddingMode, ScanVolume, VolumeKind
from .defect import DefectRecord, DefectShape, TruthSet
from .distribution import WeibullParams
from .report import CalibrationResult, DefectResult, EvalReport, SizingAggregate, StageDetection

__all__ = [
    'AxisCalib',
    'PaddingMode',
    'ScanVolume',
    'VolumeKind',
    'DefectRecord',
    'DefectShape',
    'TruthSet',
    'WeibullParams',
    'EvalReport',
    'StageDetection',
    'DefectResult',
    'SizingAggregate',
    'CalibrationResult',
]
