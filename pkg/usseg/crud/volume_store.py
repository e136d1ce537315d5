"""USV volume files: fixed little-endian header followed by f32 samples in frame, time, beam order."""
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from usseg.errors import VolumeFormatError
from usseg.models.volume import KIND_CODES, AxisCalib, ScanVolume

logger = logging.getLogger(__name__)

MAGIC = b"USVF"
VERSION = 1
HEADER = struct.Struct("<4sIIIIIffffI")  # 44 bytes
HEADER_FIELDS = ["magic", "version", "kind", "n_frames", "n_time", "n_beams",
                 "scan_step_mm", "beam_pitch_mm", "sample_rate_hz", "velocity_mm_per_us", "front_wall_index"]

_KINDS_BY_CODE = {code: kind for kind, code in KIND_CODES.items()}


def _from_f32(value: float) -> float:
    """Shortest decimal that round-trips at f32, so 0.8 reads back as 0.8."""
    return float(str(np.float32(value)))


def encode_volume(vol: ScanVolume) -> bytes:
    c = vol.calib
    header = HEADER.pack(MAGIC, VERSION, KIND_CODES[vol.kind], vol.n_frames, vol.n_time, vol.n_beams,
                         c.scan_step_mm, c.beam_pitch_mm, c.sample_rate_hz, c.velocity_mm_per_us, c.front_wall_index)
    return header + vol.data.astype("<f4").tobytes(order="C")


def decode_volume(raw: bytes) -> ScanVolume:
    if len(raw) < HEADER.size:
        raise VolumeFormatError(f"file has {len(raw)} bytes, header needs {HEADER.size}", field="header")
    fields = dict(zip(HEADER_FIELDS, HEADER.unpack_from(raw)))
    if fields["magic"] != MAGIC:
        raise VolumeFormatError(f"expected {MAGIC!r}, got {fields['magic']!r}", field="magic")
    if fields["version"] != VERSION:
        raise VolumeFormatError(f"unsupported version {fields['version']}", field="version")
    if fields["kind"] not in _KINDS_BY_CODE:
        raise VolumeFormatError(f"unknown kind code {fields['kind']}", field="kind")
    for name in ("n_frames", "n_time", "n_beams"):
        if fields[name] < 1:
            raise VolumeFormatError("dimension must be >= 1", field=name)

    try:
        calib = AxisCalib(
            scan_step_mm=_from_f32(fields["scan_step_mm"]),
            beam_pitch_mm=_from_f32(fields["beam_pitch_mm"]),
            sample_rate_hz=_from_f32(fields["sample_rate_hz"]),
            velocity_mm_per_us=_from_f32(fields["velocity_mm_per_us"]),
            front_wall_index=fields["front_wall_index"],
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise VolumeFormatError(first["msg"], field=str(first["loc"][0])) from e

    shape = (fields["n_frames"], fields["n_time"], fields["n_beams"])
    expected = int(np.prod(shape)) * 4
    payload = raw[HEADER.size:]
    if len(payload) != expected:
        raise VolumeFormatError(f"expected {expected} payload bytes for dims {shape}, got {len(payload)}",
                                field="payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    if calib.front_wall_index >= shape[1]:
        raise VolumeFormatError(f"{calib.front_wall_index} outside time axis of length {shape[1]}",
                                field="front_wall_index")
    return ScanVolume(data, _KINDS_BY_CODE[fields["kind"]], calib)


def read_volume(path: str) -> ScanVolume:
    vol = decode_volume(Path(path).read_bytes())
    logger.debug("Read %s volume %s from %s", vol.kind.value, vol.shape, path)
    return vol


def write_volume(vol: ScanVolume, path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_volume(vol))
    logger.debug("Wrote %s volume %s to %s", vol.kind.value, vol.shape, path)
    return path
