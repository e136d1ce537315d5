"""
Segment and score a sample at every confidence level of `eval.confidences`.

Writes one detection table and one sizing table covering all levels. When a
second, independently synthesized calibration sample is given, the oversize
offset is fitted on it per level and applied to the main sample.
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from usseg.commands.common import add_config_argument, load_config, parse_float_list, read_envelope, sibling
from usseg.commands.infer import load_for_inference
from usseg.crud import tables
from usseg.errors import ArgumentError
from usseg.models.defect import TruthSet
from usseg.models.report import EvalReport
from usseg.schemas.evaluation import EvalConfig
from usseg.schemas.inference import InferConfig
from usseg.schemas.run import RunConfig
from usseg.services import evaluation_service, inference_service

logger = logging.getLogger(__name__)

DETECTION_FILE = "sweep_detection.csv"
SIZING_FILE = "sweep_sizing.csv"
CALIBRATION_FILE = "sweep_calibration.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("confidence-sweep", help="segment and score a sample at every confidence level")
    add_config_argument(parser)
    parser.add_argument("--model", required=True)
    parser.add_argument("--in", dest="input", required=True, help="volume to segment (rf or envelope)")
    parser.add_argument("--truth", required=True, help="truth CSV of the volume")
    parser.add_argument("--calibration-in", help="second sample the oversize offset is fitted on")
    parser.add_argument("--calibration-truth", help="its truth CSV (default <calibration-in>_truth.csv)")
    parser.add_argument("--confidences", help="comma separated levels (default: eval.confidences)")
    parser.add_argument("--sample", help="sample name in the tables (default: volume file stem)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.set_defaults(handler=run)


def score_confidences(model_path: str, input_path: str, truth_path: str, cfg: RunConfig,
                      confidences: Sequence[float], sample: str, threads: Optional[int] = None) -> List[EvalReport]:
    """One evaluation report per confidence level, all from the same model and volume."""
    model, vol = load_for_inference(model_path, input_path, cfg.infer)
    env = read_envelope(input_path)
    truth = TruthSet(tables.read_truth(truth_path))
    reports = []
    for confidence in confidences:
        infer_cfg = InferConfig.model_validate({**cfg.infer.model_dump(), "confidence": confidence})
        result = inference_service.run_pipeline(model, vol, infer_cfg, threads=threads)
        reports.append(evaluation_service.evaluate_sample(env, result.stages, truth, cfg.eval, sample=sample,
                                                          confidence=confidence, filter_size=result.filter_size))
    return reports


def sweep_confidences(model_path: str, input_path: str, truth_path: str, out_dir: str, cfg: RunConfig,
                      calibration_path: Optional[str] = None, calibration_truth: Optional[str] = None,
                      confidences: Optional[Sequence[float]] = None, sample: Optional[str] = None,
                      threads: Optional[int] = None) -> List[EvalReport]:
    if confidences is not None:
        confidences = EvalConfig.model_validate({**cfg.eval.model_dump(), "confidences": list(confidences)}).confidences
    else:
        confidences = cfg.eval.confidences
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports = score_confidences(model_path, input_path, truth_path, cfg, confidences,
                                sample or Path(input_path).stem, threads)
    calibration_reports = []
    if calibration_path is not None:
        calibration_truth = calibration_truth or str(sibling(calibration_path, "_truth", ".csv"))
        calibration_reports = score_confidences(model_path, calibration_path, calibration_truth, cfg, confidences,
                                                Path(calibration_path).stem, threads)
        tables.write_frame(evaluation_service.calibration_table(calibration_reports, reports), out / CALIBRATION_FILE)

    everything = reports + calibration_reports
    tables.write_frame(evaluation_service.detection_table(everything), out / DETECTION_FILE)
    tables.write_frame(evaluation_service.sizing_table(everything), out / SIZING_FILE)
    logger.info("Confidence sweep over %d levels written to %s", len(confidences), out)
    return reports


def run(args) -> int:
    cfg = load_config(args)
    if args.calibration_truth is not None and args.calibration_in is None:
        raise ArgumentError("--calibration-truth needs --calibration-in")
    confidences = parse_float_list(args.confidences) if args.confidences is not None else None
    sweep_confidences(args.model, args.input, args.truth, args.out, cfg, args.calibration_in,
                      args.calibration_truth, confidences, args.sample, threads=args.threads)
    return 0
