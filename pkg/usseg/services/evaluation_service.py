"""
Quantitative evaluation of segmented volumes against synthetic ground truth.

Everything in-plane works on (frames, beams) C-scan fields. Widths use the
bounding extent convention: pixel span along each in-plane axis times its
pitch, averaged over the two axes.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from skimage.measure import regionprops
from sklearn.metrics import mean_absolute_error

from usseg.errors import ArgumentError, EvaluationError
from usseg.models.defect import DefectRecord, DefectShape, TruthSet
from usseg.models.report import CalibrationResult, DefectResult, EvalReport, SizingAggregate, StageDetection
from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind
from usseg.schemas.evaluation import EvalConfig
from usseg.services import volume_service
from usseg.services.morphology import label_components
from usseg.services.synth_service import rasterize_footprint, truth_cscan

logger = logging.getLogger(__name__)

DETECTION_COLUMNS = ["confidence", "sample", "stage", "tp", "fp", "fn", "accuracy"]
SIZING_COLUMNS = ["sample", "width_mm", "confidence", "mae_mm", "std_mm", "n"]
CALIBRATION_COLUMNS = ["confidence", "offset_mm", "uncorrected_mae_mm", "corrected_mae_mm", "n"]

_NEIGHBOURS = [(df, db) for df in (-1, 0, 1) for db in (-1, 0, 1) if (df, db) != (0, 0)]


def detection_accuracy(tp: int, fp: int) -> float:
    """100 * TP / (TP + FP); 0 when nothing was predicted."""
    if tp + fp == 0:
        return 0.0
    return 100.0 * tp / (tp + fp)


@dataclass
class DetectionCounts:
    tp: int
    fp: int
    fn: int

    @property
    def accuracy(self) -> float:
        return detection_accuracy(self.tp, self.fp)


def detection(pred: np.ndarray, truth: np.ndarray, connectivity: int = 8) -> DetectionCounts:
    """A truth defect overlapped by any prediction is a TP; a predicted component touching no defect is a FP."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ArgumentError(f"prediction {pred.shape} and truth {truth.shape} differ in shape")
    pred_labels = label_components(pred, connectivity)
    truth_labels = label_components(truth, connectivity)
    n_truth = int(truth_labels.max())
    n_pred = int(pred_labels.max())

    hit_truth = np.unique(truth_labels[pred & truth])
    hit_pred = np.unique(pred_labels[pred & truth])
    tp = int(np.count_nonzero(hit_truth))
    fp = n_pred - int(np.count_nonzero(hit_pred))
    return DetectionCounts(tp=tp, fp=fp, fn=n_truth - tp)


def _single_region(component: np.ndarray):
    component = np.asarray(component, dtype=bool)
    if not component.any():
        raise EvaluationError("component is empty")
    return regionprops(component.astype(np.uint8))[0]


def defect_width(component: np.ndarray, calib: AxisCalib) -> float:
    """Mean of the bounding extents along frames and beams, in mm."""
    f0, b0, f1, b1 = _single_region(component).bbox
    return 0.5 * ((f1 - f0) * calib.scan_step_mm + (b1 - b0) * calib.beam_pitch_mm)


def equivalent_diameter(component: np.ndarray, calib: AxisCalib) -> float:
    """Diameter of the disc with the component's area, in mm."""
    area = _single_region(component).area * calib.scan_step_mm * calib.beam_pitch_mm
    return math.sqrt(4.0 * area / math.pi)


def centroid_mm(component: np.ndarray, calib: AxisCalib) -> Tuple[float, float]:
    f, b = _single_region(component).centroid
    return f * calib.scan_step_mm, b * calib.beam_pitch_mm


def _climb(cscan: np.ndarray, seed: Tuple[int, int]) -> Tuple[int, int]:
    """Steepest ascent from the seed to a local maximum."""
    n_f, n_b = cscan.shape
    f, b = seed
    while True:
        best = (f, b)
        for df, db in _NEIGHBOURS:
            nf, nb = f + df, b + db
            if 0 <= nf < n_f and 0 <= nb < n_b and cscan[nf, nb] > cscan[best]:
                best = (nf, nb)
        if best == (f, b):
            return f, b
        f, b = best


def six_db_mask(cscan: np.ndarray, seed: Tuple[int, int]) -> np.ndarray:
    """Pixels at or above half the local peak that are 8-connected to it."""
    cscan = np.asarray(cscan, dtype=np.float64)
    seed = (int(seed[0]), int(seed[1]))
    if not (0 <= seed[0] < cscan.shape[0] and 0 <= seed[1] < cscan.shape[1]):
        raise ArgumentError(f"seed {seed} outside the field {cscan.shape}")
    if not cscan[seed] > 0:
        raise EvaluationError(f"seed {seed} lies on zero background")
    peak = _climb(cscan, seed)
    labels = label_components(cscan >= 0.5 * cscan[peak], connectivity=8)
    return labels == labels[peak]


def _match_component(labels: np.ndarray, footprint: np.ndarray) -> Optional[int]:
    """Label overlapping the footprint most; ties go to the closest centroid."""
    overlap = np.bincount(labels[footprint], minlength=labels.max() + 1)
    overlap[0] = 0
    if overlap.max() == 0:
        return None
    candidates = np.flatnonzero(overlap == overlap.max())
    if candidates.size == 1:
        return int(candidates[0])
    target = np.argwhere(footprint).mean(axis=0)
    distances = [np.linalg.norm(np.argwhere(labels == c).mean(axis=0) - target) for c in candidates]
    return int(candidates[int(np.argmin(distances))])


def component_depth(mask: ScanVolume, component: np.ndarray) -> float:
    """Mean depth of flagged voxels in the component column nearest its centroid."""
    pixels = np.argwhere(component)
    centroid = pixels.mean(axis=0)
    f, b = pixels[np.argmin(((pixels - centroid) ** 2).sum(axis=1))]
    times = np.flatnonzero(mask.data[f, :, b] > 0)
    if times.size == 0:
        raise EvaluationError(f"no flagged voxels in column ({f}, {b})")
    return float(np.mean(mask.calib.depth_mm(times)))


def localization(component: np.ndarray, reference: np.ndarray, mask: ScanVolume,
                 defect: DefectRecord) -> Tuple[float, Optional[float]]:
    """In-plane centroid distance to the 6 dB mask (mm) and measured depth (mm, circles only)."""
    pf, pb = centroid_mm(component, mask.calib)
    rf, rb = centroid_mm(reference, mask.calib)
    in_plane = math.hypot(pf - rf, pb - rb)
    depth = component_depth(mask, component) if defect.shape == DefectShape.CIRCLE else None
    return in_plane, depth


def _six_db_reference(env: ScanVolume, defect: DefectRecord, cfg: EvalConfig) -> np.ndarray:
    calib = env.calib
    t_mid = calib.time_index(defect.depth_mm)
    half = cfg.gate_half_width_mm / calib.mm_per_sample
    gate = (max(0, int(math.floor(t_mid - half))), min(env.n_time, int(math.ceil(t_mid + half)) + 1))
    cscan = volume_service.cscan_amplitude(env, gate)
    seed = (int(np.clip(round(defect.center_frame), 0, env.n_frames - 1)),
            int(np.clip(round(defect.center_beam), 0, env.n_beams - 1)))
    return six_db_mask(cscan, seed)


def sizing_aggregates(defects: Sequence[DefectResult]) -> List[SizingAggregate]:
    """MAE and std of absolute sizing error per true width, plus an overall "mean" row."""
    detected = [d for d in defects if d.detected]
    rows = []
    groups: Dict[float, List[DefectResult]] = {}
    for d in detected:
        groups.setdefault(d.true_width_mm, []).append(d)
    for width in sorted(groups):
        rows.append(_aggregate(f"{width:g}", groups[width]))
    if detected:
        rows.append(_aggregate("mean", detected))
    return rows


def _aggregate(label: str, defects: Sequence[DefectResult]) -> SizingAggregate:
    true = [d.true_width_mm for d in defects]
    measured = [d.measured_width_mm for d in defects]
    errors = np.abs(np.subtract(measured, true))
    return SizingAggregate(width_mm=label, mae_mm=float(mean_absolute_error(true, measured)),
                           std_mm=float(np.std(errors)), n=len(defects))


def evaluate_sample(env: ScanVolume, stages: Dict[str, ScanVolume], truth: TruthSet, cfg: EvalConfig,
                    sample: str = "sample", confidence: Optional[float] = None,
                    filter_size: Optional[int] = None) -> EvalReport:
    """Detection per stage and per-defect sizing and localization on the final stage.

    `stages` maps stage names to mask volumes; the last entry (or "final") is the
    segmentation being sized.
    """
    if env.kind != VolumeKind.ENVELOPE:
        raise ArgumentError(f"evaluation needs the enveloped scan, got {env.kind.value}")
    if not stages:
        raise EvaluationError("no stage masks given")
    plane = (env.n_frames, env.n_beams)
    footprints = [rasterize_footprint(d, plane, env.calib) for d in truth.defects]
    truth_field = truth_cscan(truth, plane, env.calib)

    detection_rows = []
    for name, mask in stages.items():
        if (mask.n_frames, mask.n_beams) != plane:
            raise EvaluationError(f"stage {name} has in-plane shape {(mask.n_frames, mask.n_beams)}, expected {plane}")
        counts = detection(volume_service.cscan_mask(mask, volume_service.full_gate(mask)), truth_field,
                           cfg.connectivity)
        detection_rows.append(StageDetection(stage=name, tp=counts.tp, fp=counts.fp, fn=counts.fn,
                                             accuracy=counts.accuracy))

    final = stages.get("final", list(stages.values())[-1])
    labels = label_components(volume_service.cscan_mask(final, volume_service.full_gate(final)), cfg.connectivity)

    results = []
    for defect, footprint in zip(truth.defects, footprints):
        match = _match_component(labels, footprint)
        if match is None:
            results.append(DefectResult(id=defect.id, shape=defect.shape, true_width_mm=defect.width_mm,
                                        detected=False, true_depth_mm=defect.depth_mm))
            continue
        component = labels == match
        reference = _six_db_reference(env, defect, cfg)
        width = defect_width(component, final.calib)
        in_plane, depth = localization(component, reference, final, defect)
        results.append(DefectResult(
            id=defect.id,
            shape=defect.shape,
            true_width_mm=defect.width_mm,
            detected=True,
            measured_width_mm=width,
            equivalent_diameter_mm=equivalent_diameter(component, final.calib),
            sizing_error_mm=width - defect.width_mm,
            six_db_width_mm=defect_width(reference, env.calib),
            in_plane_mm=in_plane,
            true_depth_mm=defect.depth_mm,
            measured_depth_mm=depth,
            depth_error_mm=None if depth is None else depth - defect.depth_mm,
        ))

    report = EvalReport(sample=sample, confidence=confidence, filter_size=filter_size,
                        detection=detection_rows, defects=results, sizing=sizing_aggregates(results))
    last = detection_rows[-1]
    logger.info("%s: %d/%d defects detected, %d false positives, accuracy %.2f%%",
                sample, last.tp, len(truth.defects), last.fp, last.accuracy)
    return report


def sizing_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for agg in report.sizing:
            rows.append({"sample": report.sample, "width_mm": agg.width_mm, "confidence": report.confidence,
                         "mae_mm": agg.mae_mm, "std_mm": agg.std_mm, "n": agg.n})
    return pd.DataFrame(rows, columns=SIZING_COLUMNS)


def detection_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        for row in report.detection:
            rows.append({"confidence": report.confidence, "sample": report.sample, **row.model_dump()})
    return pd.DataFrame(rows, columns=DETECTION_COLUMNS)


def _detected(reports: Sequence[EvalReport]) -> List[DefectResult]:
    return [d for r in reports for d in r.defects if d.detected]


def calibrate(reports: Sequence[EvalReport]) -> float:
    """Mean signed sizing error (oversize) over the detected defects of the calibration reports."""
    detected = _detected(reports)
    if not detected:
        raise EvaluationError("calibration needs at least one detected defect")
    return float(np.mean([d.sizing_error_mm for d in detected]))


def apply_calibration(offset_mm: float, reports: Sequence[EvalReport]) -> CalibrationResult:
    """MAE of the held-out reports before and after subtracting the offset."""
    detected = _detected(reports)
    if not detected:
        raise EvaluationError("no detected defects to correct")
    true = [d.true_width_mm for d in detected]
    measured = np.array([d.measured_width_mm for d in detected])
    return CalibrationResult(
        offset_mm=offset_mm,
        uncorrected_mae_mm=float(mean_absolute_error(true, measured)),
        corrected_mae_mm=float(mean_absolute_error(true, measured - offset_mm)),
        n=len(detected),
    )


def calibration_table(calibration: Sequence[EvalReport], held_out: Sequence[EvalReport]) -> pd.DataFrame:
    """
    Oversize offset fitted on each calibration report and applied to the held-out
    reports made at the same confidence. Confidences without a detected defect
    on either side are skipped.
    """
    rows = []
    for cal in calibration:
        targets = [r for r in held_out if r.confidence == cal.confidence]
        if not _detected([cal]) or not _detected(targets):
            logger.warning("No detected defects to calibrate at confidence %s", cal.confidence)
            continue
        result = apply_calibration(calibrate([cal]), targets)
        rows.append({"confidence": cal.confidence, **result.model_dump()})
    return pd.DataFrame(rows, columns=CALIBRATION_COLUMNS)
