import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from usseg import __version__
from usseg.commands import evaluate, infer, pipeline, render, stride_study, sweep, synth, train
from usseg.config import settings
from usseg.errors import ArgumentError, ConfigError, USSegError
from usseg.logging_config import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = [synth, train, infer, evaluate, sweep, render, pipeline, stride_study]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usseg",
        description="Self-supervised defect segmentation of phased-array ultrasonic volumes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.LOG_LEVEL})")
    parser.add_argument("--threads", type=int, default=None, help=f"worker cap (default {settings.THREADS})")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    try:
        configure_logging(args.log_level)
    except ValueError as e:
        print(f"usseg: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"usseg: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        print(f"usseg: invalid value: {key}: {first['msg']}", file=sys.stderr)
        return EXIT_USAGE
    except ArgumentError as e:
        print(f"usseg: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (USSegError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"usseg: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
