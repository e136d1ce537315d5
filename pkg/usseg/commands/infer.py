import logging
from typing import Optional, Tuple

from usseg.commands.common import add_config_argument, load_config, sibling
from usseg.crud.model_store import load_model
from usseg.crud.volume_store import read_volume, write_volume
from usseg.models.volume import PaddingMode, ScanVolume
from usseg.schemas.inference import InferConfig, Sidedness, SweepMode
from usseg.services import inference_service
from usseg.services.inference_service import STAGE_SUFFIXES, PipelineResult
from usseg.services.prob_net import ProbNet
from usseg.services.volume_service import prepare_for_inference

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="segment a volume with a trained model")
    add_config_argument(parser)
    parser.add_argument("--model", required=True)
    parser.add_argument("--in", dest="input", required=True, help="volume to segment (rf or envelope)")
    parser.add_argument("--out", required=True, help="final mask USV")
    parser.add_argument("--confidence", type=float)
    parser.add_argument("--sweep", choices=[m.value for m in SweepMode])
    parser.add_argument("--padding", choices=[m.value for m in PaddingMode])
    parser.add_argument("--sidedness", choices=[m.value for m in Sidedness])
    parser.add_argument("--time-downsample", type=int)
    parser.add_argument("--min-defect-mm", type=float)
    parser.add_argument("--stages", action="store_true", help="also write forward/backward/combined masks")
    parser.set_defaults(handler=run)


def apply_overrides(cfg: InferConfig, args) -> InferConfig:
    update = {}
    for name in ("confidence", "sweep", "padding", "sidedness", "time_downsample", "min_defect_mm"):
        value = getattr(args, name, None)
        if value is not None:
            update[name] = value
    if getattr(args, "stages", False):
        update["stages"] = True
    return InferConfig.model_validate({**cfg.model_dump(), **update})


def load_for_inference(model_path: str, input_path: str, cfg: InferConfig) -> Tuple[ProbNet, ScanVolume]:
    """Trained model and the input volume enveloped and down-sampled for it."""
    model = load_model(model_path)
    if model.time_downsample != cfg.time_downsample:
        logger.warning("Model was trained with time down-sampling %d, inferring at %d",
                       model.time_downsample, cfg.time_downsample)
    return model, prepare_for_inference(read_volume(input_path), cfg.time_downsample)


def infer_volume(model_path: str, input_path: str, out: str, cfg: InferConfig,
                 threads: Optional[int] = None) -> PipelineResult:
    model, vol = load_for_inference(model_path, input_path, cfg)
    result = inference_service.run_pipeline(model, vol, cfg, threads=threads)
    write_volume(result.final, out)
    if cfg.stages:
        for name, suffix in STAGE_SUFFIXES.items():
            if name in result.stages:
                write_volume(result.stages[name], sibling(out, suffix))
    logger.info("Wrote final mask %s", out)
    return result


def run(args) -> int:
    cfg = apply_overrides(load_config(args).infer, args)
    infer_volume(args.model, args.input, args.out, cfg, threads=args.threads)
    return 0
