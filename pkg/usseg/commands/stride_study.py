from usseg.commands.common import add_config_argument, load_config, parse_int_list, read_envelopes
from usseg.commands.train import apply_overrides
from usseg.crud import tables
from usseg.services import trainer_service

# Strides tested on the reference corpus
DEFAULT_STRIDES = "1,2,4,8,16,32,64,128,256"


def register(subparsers) -> None:
    parser = subparsers.add_parser("stride-study", help="test log-likelihood against training stride")
    add_config_argument(parser)
    parser.add_argument("--train", nargs="+", required=True)
    parser.add_argument("--val", nargs="+", required=True)
    parser.add_argument("--test", nargs="+", required=True)
    parser.add_argument("--strides", default=DEFAULT_STRIDES, help="comma separated strides")
    parser.add_argument("--repeats", type=int, default=3, help="models trained per stride")
    parser.add_argument("--out", required=True, help="output CSV")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--seed", type=int)
    parser.set_defaults(handler=run)


def run(args) -> int:
    cfg = apply_overrides(load_config(args), args)
    table = trainer_service.stride_study(
        read_envelopes(args.train), read_envelopes(args.val), read_envelopes(args.test),
        parse_int_list(args.strides), args.repeats, cfg.net, cfg.sampler, cfg.train,
    )
    tables.write_frame(table, args.out)
    return 0
