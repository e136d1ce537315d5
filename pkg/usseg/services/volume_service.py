import logging
import math
from typing import Tuple

import numpy as np
from scipy.signal import hilbert

from usseg.errors import ArgumentError
from usseg.models.volume import PaddingMode, ScanVolume, VolumeKind

logger = logging.getLogger(__name__)


def _require_kind(vol: ScanVolume, *kinds: VolumeKind) -> None:
    if vol.kind not in kinds:
        allowed = ", ".join(k.value for k in kinds)
        raise ArgumentError(f"expected a volume of kind {allowed}, got {vol.kind.value}")


def _check_gate(vol: ScanVolume, gate: Tuple[int, int]) -> Tuple[int, int]:
    t_lo, t_hi = int(gate[0]), int(gate[1])
    if not 0 <= t_lo < t_hi <= vol.n_time:
        raise ArgumentError(f"gate [{t_lo}, {t_hi}) is empty or outside [0, {vol.n_time})")
    return t_lo, t_hi


def envelope(vol: ScanVolume) -> ScanVolume:
    """Magnitude of the analytic signal of every A-scan (FFT along the time axis)."""
    _require_kind(vol, VolumeKind.RF)
    env = np.abs(hilbert(vol.data, axis=1))
    logger.debug("Enveloped %d A-scans of %d samples", vol.n_frames * vol.n_beams, vol.n_time)
    return vol.replace(data=env, kind=VolumeKind.ENVELOPE)


def downsample_time(vol: ScanVolume, factor: int) -> ScanVolume:
    """Keep time samples 0, factor, 2*factor, ..."""
    if factor < 1:
        raise ArgumentError(f"down-sampling factor must be >= 1, got {factor}")
    if factor == 1:
        return vol
    calib = vol.calib.model_copy(update={
        "sample_rate_hz": vol.calib.sample_rate_hz / factor,
        "front_wall_index": vol.calib.front_wall_index // factor,
    })
    return vol.replace(data=vol.data[:, ::factor, :], calib=calib)


def prepare_for_inference(vol: ScanVolume, time_downsample: int) -> ScanVolume:
    """Envelope (when given RF) followed by time down-sampling."""
    if vol.kind == VolumeKind.RF:
        vol = envelope(vol)
    _require_kind(vol, VolumeKind.ENVELOPE)
    return downsample_time(vol, time_downsample)


def cscan_amplitude(vol: ScanVolume, gate: Tuple[int, int]) -> np.ndarray:
    """Peak envelope over the gate, as a frames x beams field."""
    _require_kind(vol, VolumeKind.ENVELOPE)
    t_lo, t_hi = _check_gate(vol, gate)
    return vol.data[:, t_lo:t_hi, :].max(axis=1)


def cscan_mask(vol: ScanVolume, gate: Tuple[int, int]) -> np.ndarray:
    """Logical OR of the mask over the gate."""
    _require_kind(vol, VolumeKind.MASK)
    t_lo, t_hi = _check_gate(vol, gate)
    return vol.data[:, t_lo:t_hi, :].any(axis=1)


def full_gate(vol: ScanVolume) -> Tuple[int, int]:
    return 0, vol.n_time


def bscan(vol: ScanVolume, frame: int) -> np.ndarray:
    """The time x beams slice at one frame."""
    if not 0 <= frame < vol.n_frames:
        raise ArgumentError(f"frame {frame} outside [0, {vol.n_frames})")
    return vol.data[frame]


def pad_frames(data: np.ndarray, width: int, mode: PaddingMode) -> np.ndarray:
    """Prepend `width` frames to a (frames, ...) array."""
    mode = PaddingMode(mode)
    if width < 0:
        raise ArgumentError(f"padding width must be >= 0, got {width}")
    if width == 0:
        return data
    pad = [(width, 0)] + [(0, 0)] * (data.ndim - 1)
    if mode == PaddingMode.EDGE:
        return np.pad(data, pad, mode="edge")
    if mode == PaddingMode.REFLECT:
        if width >= data.shape[0]:
            raise ArgumentError(f"reflect padding of width {width} needs more than {width} frames, got {data.shape[0]}")
        # mirrors frames 1..width, frame 0 is not repeated
        return np.pad(data, pad, mode="reflect")
    return np.pad(data, pad, mode="constant", constant_values=0.0)


def pad_scan_axis(vol: ScanVolume, width: int, mode: PaddingMode) -> ScanVolume:
    return vol.replace(data=pad_frames(vol.data, width, mode))


def n_downsampled(n_time: int, factor: int) -> int:
    return math.ceil(n_time / factor)
