"""
Sequential sweep inference.

Every (time, beam) lane keeps a rolling buffer of the last W values believed to
be clean. For each frame the buffers of all lanes are predicted in one batch;
voxels above the confidence quantile are flagged and enter their buffer as the
predicted Weibull mean instead of the measured amplitude, so a defect never
contaminates the context used for the frames that follow it.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol

import numpy as np

from usseg.config import settings
from usseg.errors import ArgumentError, InferenceError
from usseg.models.distribution import WeibullParams
from usseg.models.volume import PaddingMode, ScanVolume, VolumeKind
from usseg.schemas.inference import InferConfig, Sidedness, SweepMode
from usseg.services import morphology
from usseg.services.trainer_service import lane_matrix
from usseg.services.volume_service import pad_frames
from usseg.services.weibull import params_mean, params_quantile

logger = logging.getLogger(__name__)

STAGE_SUFFIXES = {
    "forward": "_forward",
    "backward": "_backward",
    "combined": "_combined",
    "final": "_final",
}


class Predictor(Protocol):
    """Anything that maps (N, window) normalized windows to Weibull parameters."""
    window: int
    norm_scale: float

    def predict(self, windows: np.ndarray) -> WeibullParams:
        ...


def _check_model(model: Predictor, vol: ScanVolume) -> None:
    if vol.kind != VolumeKind.ENVELOPE:
        raise InferenceError(f"inference needs an enveloped volume, got {vol.kind.value}")
    scale = model.norm_scale
    if not (scale is not None and math.isfinite(scale) and scale > 0):
        raise InferenceError(f"model has no usable normalization scale ({scale}); was it trained?")


def _sweep_frames(model: Predictor, lanes: np.ndarray, cfg: InferConfig) -> np.ndarray:
    """Forward sweep over a (lanes, frames) matrix of normalized amplitudes."""
    n_lanes, n_frames = lanes.shape
    window = model.window
    # seed: the W frames that precede frame 0 after padding
    buffer = np.ascontiguousarray(pad_frames(lanes.T, window, cfg.padding)[:window].T)
    flags = np.zeros((n_lanes, n_frames), dtype=bool)
    two_sided = cfg.sidedness == Sidedness.TWO_SIDED

    for f in range(n_frames):
        started = time.perf_counter()
        params = model.predict(buffer)
        measured = lanes[:, f]
        flagged = measured > params_quantile(params, cfg.confidence)
        if two_sided:
            flagged |= measured < params_quantile(params, 1.0 - cfg.confidence)
        flags[:, f] = flagged
        clean = np.where(flagged, params_mean(params), measured)
        buffer[:, :-1] = buffer[:, 1:]
        buffer[:, -1] = clean
        logger.debug("Frame %d: %d of %d voxels flagged (%.3fs)", f, int(flagged.sum()), n_lanes,
                     time.perf_counter() - started)
    return flags


def sweep(model: Predictor, vol: ScanVolume, cfg: InferConfig, reverse: bool = False) -> ScanVolume:
    """Defect mask from one sequential pass over the frames.

    `vol` holds raw envelope amplitudes on the inference time grid; they are
    normalized by the model's stored scale. With `reverse` the frames are
    visited last to first.
    """
    _check_model(model, vol)
    data = vol.data[::-1] if reverse else vol.data
    n_frames, n_time, n_beams = data.shape
    if cfg.padding == PaddingMode.REFLECT:
        logger.warning("Reflect padding seeds the first %d frames from later frames", model.window)

    lanes = lane_matrix(data) / model.norm_scale
    flags = _sweep_frames(model, lanes, cfg)
    mask = flags.reshape(n_time, n_beams, n_frames).transpose(2, 0, 1)
    if reverse:
        mask = mask[::-1]
    return ScanVolume(mask.astype(np.float64), VolumeKind.MASK, vol.calib)


def forward_sweep(model: Predictor, vol: ScanVolume, cfg: InferConfig) -> ScanVolume:
    return sweep(model, vol, cfg)


def backward_sweep(model: Predictor, vol: ScanVolume, cfg: InferConfig) -> ScanVolume:
    """Same model, scan simulated from the other direction."""
    return sweep(model, vol, cfg, reverse=True)


def combine(fwd: ScanVolume, bwd: ScanVolume) -> ScanVolume:
    """Voxelwise logical AND of two masks."""
    for m in (fwd, bwd):
        if m.kind != VolumeKind.MASK:
            raise ArgumentError(f"combine needs mask volumes, got {m.kind.value}")
    if fwd.shape != bwd.shape:
        raise ArgumentError(f"mask dimensions differ: {fwd.shape} vs {bwd.shape}")
    return fwd.replace(data=np.logical_and(fwd.data > 0, bwd.data > 0).astype(np.float64))


@dataclass
class PipelineResult:
    final: ScanVolume
    filter_size: int
    stages: Dict[str, ScanVolume] = field(default_factory=dict)
    seconds: Dict[str, float] = field(default_factory=dict)


def run_pipeline(model: Predictor, vol: ScanVolume, cfg: InferConfig, min_defect_mm: Optional[float] = None,
                 threads: Optional[int] = None) -> PipelineResult:
    """Sweeps, combination and per-plane area opening.

    In `both` mode the two sweeps run concurrently; each only reads `vol`.
    """
    _check_model(model, vol)
    min_defect_mm = cfg.min_defect_mm if min_defect_mm is None else min_defect_mm
    filter_size = morphology.filter_from_min_size(min_defect_mm, vol.calib)
    if filter_size < 1:
        logger.warning("Minimum defect size %.3f mm is below one pixel; area opening keeps everything", min_defect_mm)
        filter_size = 1

    stages: Dict[str, ScanVolume] = {}
    seconds: Dict[str, float] = {}

    def timed(name, fn, *args):
        started = time.perf_counter()
        result = fn(*args)
        seconds[name] = time.perf_counter() - started
        logger.info("%s sweep finished in %.2fs", name.capitalize(), seconds[name])
        return result

    if cfg.sweep == SweepMode.BOTH:
        workers = max(1, min(2, threads or settings.THREADS))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fwd = pool.submit(timed, "forward", forward_sweep, model, vol, cfg)
            bwd = pool.submit(timed, "backward", backward_sweep, model, vol, cfg)
            stages["forward"], stages["backward"] = fwd.result(), bwd.result()
        combined = combine(stages["forward"], stages["backward"])
    elif cfg.sweep == SweepMode.FORWARD:
        stages["forward"] = timed("forward", forward_sweep, model, vol, cfg)
        combined = stages["forward"]
    else:
        stages["backward"] = timed("backward", backward_sweep, model, vol, cfg)
        combined = stages["backward"]
    stages["combined"] = combined

    final = morphology.area_opening(combined, filter_size, cfg.connectivity)
    stages["final"] = final
    logger.info("Segmented %d voxels (filter %d px, c=%g)", int(final.data.sum()), filter_size, cfg.confidence)
    return PipelineResult(final=final, filter_size=filter_size, stages=stages, seconds=seconds)
