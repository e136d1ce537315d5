try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from usseg.errors import ConfigError
from usseg.schemas.evaluation import EvalConfig
from usseg.schemas.inference import InferConfig
from usseg.schemas.synth import SynthConfig
from usseg.schemas.training import NetConfig, SamplerConfig, TrainConfig


class PipelineConfig(BaseModel):
    """Clean corpus used by the `pipeline` command (train / validation / test plates)."""
    model_config = ConfigDict(extra="forbid")

    train_thicknesses_mm: List[float] = Field(default_factory=lambda: [2.75, 4.25, 4.25, 6.0], min_length=1)
    val_thickness_mm: float = Field(6.0, gt=0)
    test_thickness_mm: float = Field(8.6, gt=0)
    confidence_sweep: bool = True  # also sweep eval.confidences and calibrate on a second sample


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    out_dir: Optional[str] = None
    synth: SynthConfig = SynthConfig()
    net: NetConfig = NetConfig()
    sampler: SamplerConfig = SamplerConfig()
    train: TrainConfig = TrainConfig()
    infer: InferConfig = InferConfig()
    eval: EvalConfig = EvalConfig()
    pipeline: PipelineConfig = PipelineConfig()


def _key_path(loc) -> str:
    return ".".join(str(part) for part in loc)


def parse_run_config(document: dict) -> RunConfig:
    """Validate a config document; the first error is reported with its dotted key path."""
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], key=_key_path(first["loc"])) from e


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(Path(path), "rb") as f:
            document = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"not a valid TOML document: {e}", key=str(path)) from e
    return parse_run_config(document)
