import logging
from typing import List, Optional, Tuple

from usseg.commands.common import add_config_argument, load_config, read_envelopes, sibling
from usseg.crud import tables
from usseg.crud.model_store import save_model
from usseg.schemas.run import RunConfig
from usseg.services import trainer_service
from usseg.services.prob_net import ProbNet

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train the probabilistic network on clean volumes")
    add_config_argument(parser)
    parser.add_argument("--train", nargs="+", required=True, help="clean training volumes (USV, rf or envelope)")
    parser.add_argument("--val", nargs="+", required=True, help="clean validation volumes")
    parser.add_argument("--out", required=True, help="output model file")
    parser.add_argument("--history", help="history CSV (default <out>_history.csv)")
    parser.add_argument("--stride", type=int, help="training sampling stride")
    parser.add_argument("--epochs", type=int, help="maximum epochs")
    parser.add_argument("--lr", type=float, help="Adam learning rate")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--seed", type=int)
    parser.set_defaults(handler=run)


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    sampler, train = {}, {}
    if getattr(args, "stride", None) is not None:
        sampler["stride"] = args.stride
    if getattr(args, "epochs", None) is not None:
        train["max_epochs"] = args.epochs
    if getattr(args, "lr", None) is not None:
        train["learning_rate"] = args.lr
    if getattr(args, "batch_size", None) is not None:
        train["batch_size"] = args.batch_size
    return RunConfig.model_validate({
        **cfg.model_dump(),
        "sampler": {**cfg.sampler.model_dump(), **sampler},
        "train": {**cfg.train.model_dump(), **train},
    })


def train_model(train_paths: List[str], val_paths: List[str], cfg: RunConfig, out: str,
                history_path: Optional[str] = None) -> Tuple[ProbNet, trainer_service.TrainHistory]:
    history_path = history_path or str(sibling(out, "_history", ".csv"))
    model = ProbNet(cfg.net)
    trained, history = trainer_service.train(model, read_envelopes(train_paths), read_envelopes(val_paths),
                                             cfg.sampler, cfg.train)
    save_model(trained, out)
    tables.write_frame(history.to_frame(), history_path)
    logger.info("Best epoch %s of %d", history.best_epoch, len(history))
    return trained, history


def run(args) -> int:
    cfg = apply_overrides(load_config(args), args)
    train_model(args.train, args.val, cfg, args.out, args.history)
    return 0
