"""
USSM model files.

Layout (little-endian):
    "USSM" | u32 version | u32 config length | NetConfig JSON (utf-8)
    f64 norm_scale | u32 time_downsample | u32 parameter count
    parameter count x f32, in ProbNet.param_layout() order
"""
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from usseg.errors import ModelFormatError
from usseg.schemas.training import NetConfig
from usseg.services.prob_net import ProbNet

logger = logging.getLogger(__name__)

MAGIC = b"USSM"
VERSION = 1
PREAMBLE = struct.Struct("<4sII")
TRAILER = struct.Struct("<dII")


def encode_model(model: ProbNet) -> bytes:
    config = model.config.model_dump_json().encode("utf-8")
    return b"".join([
        PREAMBLE.pack(MAGIC, VERSION, len(config)),
        config,
        TRAILER.pack(float(model.norm_scale), int(model.time_downsample), model.param_count),
        model.params.astype("<f4").tobytes(),
    ])


def decode_model(raw: bytes) -> ProbNet:
    if len(raw) < PREAMBLE.size:
        raise ModelFormatError("file too short for a model header")
    magic, version, config_len = PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    offset = PREAMBLE.size
    if len(raw) < offset + config_len + TRAILER.size:
        raise ModelFormatError("file truncated inside the model header")
    try:
        config = NetConfig.model_validate_json(raw[offset:offset + config_len])
    except ValidationError as e:
        raise ModelFormatError(f"invalid network config: {e.errors()[0]['msg']}") from e
    offset += config_len
    norm_scale, time_downsample, param_count = TRAILER.unpack_from(raw, offset)
    offset += TRAILER.size

    model = ProbNet(config)
    if param_count != model.param_count:
        raise ModelFormatError(f"header declares {param_count} parameters, config implies {model.param_count}")
    payload = raw[offset:]
    if len(payload) != 4 * param_count:
        raise ModelFormatError(f"expected {4 * param_count} parameter bytes, got {len(payload)}")
    model.params = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    model.norm_scale = norm_scale
    model.time_downsample = time_downsample
    return model


def save_model(model: ProbNet, path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(model))
    logger.info("Saved model (%d parameters) to %s", model.param_count, path)
    return path


def load_model(path: str) -> ProbNet:
    model = decode_model(Path(path).read_bytes())
    logger.info("Loaded %s from %s", model.describe(), path)
    return model
