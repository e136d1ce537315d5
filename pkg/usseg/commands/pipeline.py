"""
End-to-end synthetic run: clean plates for training, validation and testing,
one defective sample, then train, infer and evaluate. A confidence sweep with
size calibration on a second defective sample follows unless disabled. Each step
goes through the same function its own subcommand uses, so the files match
running them by hand.
"""
import logging
from pathlib import Path

from usseg.commands.common import add_config_argument, load_config, read_envelopes
from usseg.commands.evaluate import evaluate_files
from usseg.commands.infer import infer_volume
from usseg.commands.sweep import sweep_confidences
from usseg.commands.synth import synthesize
from usseg.commands.train import train_model
from usseg.config import settings
from usseg.models.defect import DefectShape
from usseg.schemas.run import RunConfig
from usseg.schemas.synth import SynthConfig
from usseg.services.synth_service import default_defect_layout
from usseg.services.trainer_service import build_dataset, evaluate_log_likelihood

logger = logging.getLogger(__name__)

# Flat-bottom hole set used when the config lists no defects
DEFAULT_WIDTHS_MM = [3.0, 6.0, 9.0]
DEFAULT_DEPTHS_MM = [1.5, 3.0, 4.5, 6.0, 7.5]


def register(subparsers) -> None:
    parser = subparsers.add_parser("pipeline", help="synth -> train -> infer -> eval in one go")
    add_config_argument(parser)
    parser.add_argument("--out", help="output directory (default: config out_dir, then USSEG_OUTPUT_DIR)")
    parser.add_argument("--seed", type=int)
    parser.set_defaults(handler=run)


def _clean_plate(cfg: SynthConfig, thickness_mm: float, seed: int) -> SynthConfig:
    return SynthConfig.model_validate({**cfg.model_dump(), "defects": [], "steps": [], "beam_steps": [],
                                       "thickness_mm": thickness_mm, "seed": seed})


def _defective_sample(cfg: SynthConfig) -> SynthConfig:
    if cfg.defects:
        return cfg
    widths = [w for _ in DEFAULT_DEPTHS_MM for w in DEFAULT_WIDTHS_MM]
    depths = [d for d in DEFAULT_DEPTHS_MM for _ in DEFAULT_WIDTHS_MM]
    thinnest = float(cfg.thickness_map().min())
    depths = [d for d in depths if d < thinnest] or [thinnest / 2]
    defects = default_defect_layout(cfg, widths[:len(depths)], depths, [DefectShape.CIRCLE, DefectShape.SQUARE])
    return cfg.model_copy(update={"defects": defects})


def run_pipeline(cfg: RunConfig, out_dir: str, threads=None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed

    train_paths = []
    for i, thickness in enumerate(cfg.pipeline.train_thicknesses_mm):
        path = out / f"clean_train_{i}.usv"
        synthesize(_clean_plate(cfg.synth, thickness, seed + 100 + i), str(path))
        train_paths.append(str(path))
    val_path, test_path = out / "clean_val.usv", out / "clean_test.usv"
    synthesize(_clean_plate(cfg.synth, cfg.pipeline.val_thickness_mm, seed + 200), str(val_path))
    synthesize(_clean_plate(cfg.synth, cfg.pipeline.test_thickness_mm, seed + 300), str(test_path))

    sample_path = out / "sample.usv"
    truth_path = out / "sample_truth.csv"
    sample_cfg = _defective_sample(cfg.synth.model_copy(update={"seed": seed}))
    synthesize(sample_cfg, str(sample_path), str(truth_path))

    model_path = out / "model.ussm"
    model, _ = train_model(train_paths, [str(val_path)], cfg, str(model_path))
    test_set = build_dataset(read_envelopes([str(test_path)]), cfg.sampler, stride=cfg.train.test_stride,
                             norm_scale=model.norm_scale)
    if len(test_set):
        logger.info("Test log-likelihood %.4f on %d windows", evaluate_log_likelihood(model, test_set), len(test_set))

    mask_path = out / "sample_mask.usv"
    infer_volume(str(model_path), str(sample_path), str(mask_path), cfg.infer, threads=threads)

    report_path = out / "report.json"
    report = evaluate_files(str(mask_path), str(truth_path), str(sample_path), str(report_path), cfg.eval,
                            sample="sample", confidence=cfg.infer.confidence)
    if cfg.pipeline.confidence_sweep:
        calibration_path = out / "calibration.usv"
        synthesize(sample_cfg.model_copy(update={"seed": seed + 400}), str(calibration_path))
        sweep_confidences(str(model_path), str(sample_path), str(truth_path), str(out), cfg,
                          calibration_path=str(calibration_path), sample="sample", threads=threads)

    final = report.detection[-1]
    logger.info("Pipeline finished: accuracy %.2f%% (%d TP, %d FP), report %s",
                final.accuracy, final.tp, final.fp, report_path)
    return report_path


def run(args) -> int:
    cfg = load_config(args)
    out_dir = args.out or cfg.out_dir or settings.OUTPUT_DIR
    run_pipeline(cfg, out_dir, threads=args.threads)
    return 0
