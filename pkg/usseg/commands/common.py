import logging
from pathlib import Path
from typing import List, Optional, Tuple

from usseg.crud.volume_store import read_volume
from usseg.errors import ArgumentError
from usseg.models.volume import ScanVolume, VolumeKind
from usseg.schemas.run import RunConfig, load_run_config
from usseg.services.volume_service import envelope

logger = logging.getLogger(__name__)


def add_config_argument(parser) -> None:
    parser.add_argument("--config", help="TOML run configuration (defaults apply when omitted)")


def load_config(args) -> RunConfig:
    """Run configuration with the global --seed override applied."""
    cfg = load_run_config(getattr(args, "config", None))
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg = cfg.model_copy(update={
            "seed": seed,
            "synth": cfg.synth.model_copy(update={"seed": seed}),
            "train": cfg.train.model_copy(update={"seed": seed}),
        })
    logger.debug("Resolved configuration: %s", cfg.model_dump_json())
    return cfg


def sibling(path: str, suffix: str, extension: Optional[str] = None) -> Path:
    """`dir/name.ext` -> `dir/name<suffix><extension or .ext>`."""
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}{extension if extension is not None else path.suffix}")


def parse_gate(text: Optional[str]) -> Optional[Tuple[int, int]]:
    """"lo:hi" -> (lo, hi)."""
    if text is None:
        return None
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise ArgumentError(f"gate must look like lo:hi, got {text!r}")
    return lo, hi


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise ArgumentError(f"expected a comma separated list of integers, got {text!r}")


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise ArgumentError(f"expected a comma separated list of numbers, got {text!r}")


def read_envelope(path: str) -> ScanVolume:
    """Read a USV volume and envelope it when it holds RF."""
    vol = read_volume(path)
    if vol.kind == VolumeKind.RF:
        vol = envelope(vol)
    elif vol.kind != VolumeKind.ENVELOPE:
        raise ArgumentError(f"{path} holds a {vol.kind.value} volume, expected rf or envelope")
    return vol


def read_envelopes(paths: List[str]) -> List[ScanVolume]:
    return [read_envelope(p) for p in paths]
