import logging
from pathlib import Path
from typing import Dict, Optional

from usseg.commands.common import add_config_argument, load_config, read_envelope, sibling
from usseg.crud import tables
from usseg.crud.volume_store import read_volume
from usseg.errors import ArgumentError
from usseg.models.defect import TruthSet
from usseg.models.report import EvalReport
from usseg.models.volume import ScanVolume, VolumeKind
from usseg.schemas.evaluation import EvalConfig
from usseg.services import evaluation_service
from usseg.services.inference_service import STAGE_SUFFIXES

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="score a segmentation against ground truth")
    add_config_argument(parser)
    parser.add_argument("--mask", required=True, help="final mask USV; stage masks next to it are picked up")
    parser.add_argument("--truth", required=True, help="truth CSV")
    parser.add_argument("--volume", required=True, help="the scanned volume (rf or envelope) for 6 dB references")
    parser.add_argument("--report", required=True, help="output JSON report")
    parser.add_argument("--sample", help="sample name in the tables (default: volume file stem)")
    parser.add_argument("--confidence", type=float, help="confidence the mask was produced at")
    parser.set_defaults(handler=run)


def load_stages(mask_path: str) -> Dict[str, ScanVolume]:
    """Stage masks written by `infer --stages`, followed by the final mask itself."""
    stages = {}
    for name in ("forward", "backward", "combined"):
        path = sibling(mask_path, STAGE_SUFFIXES[name])
        if path.exists():
            stages[name] = read_volume(str(path))
    stages["final"] = read_volume(mask_path)
    for name, mask in stages.items():
        if mask.kind != VolumeKind.MASK:
            raise ArgumentError(f"{name} stage file holds a {mask.kind.value} volume, expected a mask")
    return stages


def evaluate_files(mask_path: str, truth_path: str, volume_path: str, report_path: str, cfg: EvalConfig,
                   sample: Optional[str] = None, confidence: Optional[float] = None) -> EvalReport:
    stages = load_stages(mask_path)
    truth = TruthSet(tables.read_truth(truth_path))
    env = read_envelope(volume_path)
    report = evaluation_service.evaluate_sample(env, stages, truth, cfg, sample=sample or Path(volume_path).stem,
                                                confidence=confidence)
    tables.write_report(report, report_path)
    tables.write_frame(evaluation_service.detection_table([report]), sibling(report_path, "_detection", ".csv"))
    tables.write_frame(evaluation_service.sizing_table([report]), sibling(report_path, "_sizing", ".csv"))
    return report


def run(args) -> int:
    cfg = load_config(args)
    confidence = args.confidence if args.confidence is not None else cfg.infer.confidence
    evaluate_files(args.mask, args.truth, args.volume, args.report, cfg.eval, args.sample, confidence)
    return 0
