import logging
from typing import Optional, Tuple

from usseg.commands.common import add_config_argument, load_config, sibling
from usseg.crud import tables
from usseg.crud.volume_store import write_volume
from usseg.models.defect import TruthSet
from usseg.models.volume import ScanVolume
from usseg.schemas.synth import SynthConfig
from usseg.services import synth_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="generate a synthetic RF volume with ground truth")
    add_config_argument(parser)
    parser.add_argument("--out", required=True, help="output USV volume")
    parser.add_argument("--truth", help="truth CSV (default <out>_truth.csv)")
    parser.add_argument("--mask", help="truth mask USV (default <truth>_mask.usv)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--clean", action="store_true", help="drop every configured defect")
    parser.add_argument("--thickness", type=float, help="uniform plate thickness in mm (clears frame and beam steps)")
    parser.set_defaults(handler=run)


def synthesize(cfg: SynthConfig, out: str, truth_path: Optional[str] = None,
               mask_path: Optional[str] = None) -> Tuple[ScanVolume, TruthSet]:
    """Generate one volume and write it with its truth CSV and truth mask."""
    truth_path = truth_path or str(sibling(out, "_truth", ".csv"))
    mask_path = mask_path or str(sibling(truth_path, "_mask", ".usv"))
    vol, truth = synth_service.generate(cfg)
    write_volume(vol, out)
    tables.write_truth(truth.defects, truth_path)
    write_volume(truth.mask, mask_path)
    logger.info("Synthesized %s with %d defects (truth %s, mask %s)", out, len(truth.defects), truth_path, mask_path)
    return vol, truth


def run(args) -> int:
    cfg = load_config(args).synth
    update = {}
    if args.clean:
        update["defects"] = []
    if args.thickness is not None:
        update["thickness_mm"] = args.thickness
        update["steps"] = []
        update["beam_steps"] = []
    if update:
        cfg = SynthConfig.model_validate({**cfg.model_dump(), **update})
    synthesize(cfg, args.out, args.truth, args.mask)
    return 0
