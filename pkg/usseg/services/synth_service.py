"""
Seeded synthetic phased-array scans of flat and stepped plates.

Each A-scan is a front-wall tone burst, a back-wall tone burst delayed by the
local thickness (stepped along frames or beams), spatially correlated speckle
and a fixed per-beam gain. Defects add an echo at their depth over their
(laterally blurred) footprint and shadow the back wall beneath it.
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from usseg.errors import ConfigError
from usseg.models.defect import DefectRecord, DefectShape, TruthSet
from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind
from usseg.schemas.synth import SynthConfig

logger = logging.getLogger(__name__)


def rasterize_footprint(defect: DefectRecord, shape: Tuple[int, int], calib: AxisCalib) -> np.ndarray:
    """Frames x beams cells whose centre lies inside the defect outline."""
    frames = calib.frame_mm(np.arange(shape[0]) - defect.center_frame)[:, None]
    beams = calib.beam_mm(np.arange(shape[1]) - defect.center_beam)[None, :]
    half = defect.width_mm / 2.0
    if defect.shape == DefectShape.CIRCLE:
        return frames ** 2 + beams ** 2 <= half ** 2
    return (np.abs(frames) <= half) & (np.abs(beams) <= half)


def truth_cscan(truth: TruthSet, shape: Tuple[int, int], calib: AxisCalib) -> np.ndarray:
    """Union of every defect's true footprint as a frames x beams field."""
    field = np.zeros(shape, dtype=bool)
    for defect in truth.defects:
        field |= rasterize_footprint(defect, shape, calib)
    return field


def _pulse_sigma(cfg: SynthConfig) -> float:
    """Gaussian window sigma, in samples, of the tone burst."""
    cycles_in_samples = cfg.pulse_cycles / cfg.center_frequency_hz * cfg.calib.sample_rate_hz
    return cycles_in_samples / 4.0


def _tone_burst(t: np.ndarray, t0: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    sigma = _pulse_sigma(cfg)
    tau = t - t0
    carrier = np.cos(2 * np.pi * cfg.center_frequency_hz * tau / cfg.calib.sample_rate_hz)
    return np.exp(-0.5 * (tau / sigma) ** 2) * carrier


def _attenuation(depth_mm, cfg: SynthConfig):
    return 10.0 ** (-cfg.attenuation_db_per_mm * 2.0 * np.asarray(depth_mm) / 20.0)


def _speckle(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    shape = (cfg.n_frames, cfg.n_time, cfg.n_beams)
    white = rng.standard_normal(shape)
    if cfg.speckle_amplitude == 0:
        return np.zeros(shape)
    sigma = (cfg.speckle_corr_frames, cfg.speckle_corr_time, cfg.speckle_corr_beams)
    field = gaussian_filter(white, sigma=sigma, mode="wrap")
    field /= field.std()
    return cfg.speckle_amplitude * field


def _validate_defects(cfg: SynthConfig, thickness: np.ndarray) -> None:
    for i, defect in enumerate(cfg.defects):
        footprint = rasterize_footprint(defect, thickness.shape, cfg.calib)
        if footprint.any():
            local = float(thickness[footprint].min())
        else:
            frame = int(np.clip(round(defect.center_frame), 0, cfg.n_frames - 1))
            beam = int(np.clip(round(defect.center_beam), 0, cfg.n_beams - 1))
            local = float(thickness[frame, beam])
        if defect.depth_mm >= local:
            raise ConfigError(
                f"defect {defect.id} depth {defect.depth_mm} mm is not within the local thickness {local} mm",
                key=f"synth.defects.{i}.depth_mm",
            )


def _defect_coverage(defect: DefectRecord, cfg: SynthConfig) -> np.ndarray:
    """Footprint blurred by the lateral spread, in [0, 1]."""
    footprint = rasterize_footprint(defect, (cfg.n_frames, cfg.n_beams), cfg.calib).astype(np.float64)
    if cfg.lateral_spread_mm == 0:
        return footprint
    sigma = (cfg.lateral_spread_mm / cfg.calib.scan_step_mm, cfg.lateral_spread_mm / cfg.calib.beam_pitch_mm)
    return np.clip(gaussian_filter(footprint, sigma=sigma, mode="constant"), 0.0, 1.0)


def generate(cfg: SynthConfig) -> Tuple[ScanVolume, TruthSet]:
    """Build an RF volume and its ground truth. Pure function of `cfg`."""
    thickness = cfg.thickness_map()  # (F, B)
    _validate_defects(cfg, thickness)
    calib = cfg.calib
    if calib.front_wall_index >= cfg.n_time:
        raise ConfigError("front wall lies outside the time axis", key="synth.calib.front_wall_index")

    rng = np.random.default_rng(cfg.seed)
    speckle = _speckle(rng, cfg)
    gains = np.exp(cfg.beam_gain_std * rng.standard_normal(cfg.n_beams))

    t = np.arange(cfg.n_time, dtype=np.float64)[None, :, None]  # (1, T, 1)
    fw_index = float(calib.front_wall_index)

    bw_time = calib.time_index(thickness)[:, None, :]  # (F, 1, B)
    if np.any(bw_time >= cfg.n_time):
        logger.warning("Back wall lies beyond the time axis for part of the scan")

    shadow = np.ones((cfg.n_frames, 1, cfg.n_beams))
    echoes = np.zeros((cfg.n_frames, cfg.n_time, cfg.n_beams))
    truth_mask = np.zeros_like(echoes)
    half_span = _pulse_sigma(cfg) * np.sqrt(2.0 * np.log(2.0))  # half-amplitude half-width

    for defect in cfg.defects:
        coverage = _defect_coverage(defect, cfg)[:, None, :]  # (F, 1, B)
        t_defect = calib.time_index(defect.depth_mm)
        amplitude = cfg.defect_amplitude * defect.reflectivity * _attenuation(defect.depth_mm, cfg)
        echoes += amplitude * coverage * _tone_burst(t, t_defect, cfg)
        if cfg.repeat_echoes:
            t_repeat = fw_index + 2.0 * (t_defect - fw_index)
            echoes += 0.5 * amplitude * coverage * _tone_burst(t, t_repeat, cfg)
        shadow *= 1.0 - defect.shadowing * coverage

        footprint = rasterize_footprint(defect, (cfg.n_frames, cfg.n_beams), calib)
        t_lo = max(int(np.ceil(t_defect - half_span)), 0)
        t_hi = min(int(np.floor(t_defect + half_span)) + 1, cfg.n_time)
        truth_mask[:, t_lo:t_hi, :] = np.maximum(truth_mask[:, t_lo:t_hi, :], footprint[:, None, :])

    front = cfg.front_wall_amplitude * _tone_burst(t, fw_index, cfg)
    back = cfg.back_wall_amplitude * _attenuation(thickness, cfg)[:, None, :] * shadow * _tone_burst(t, bw_time, cfg)

    rf = (front + back + echoes + speckle) * gains[None, None, :]
    volume = ScanVolume(rf, VolumeKind.RF, calib)
    truth = TruthSet(defects=list(cfg.defects), mask=ScanVolume(truth_mask, VolumeKind.MASK, calib))
    logger.info(
        "Generated %dx%dx%d RF volume with %d defect(s), seed %d",
        cfg.n_frames, cfg.n_time, cfg.n_beams, len(cfg.defects), cfg.seed,
    )
    return volume, truth


def default_defect_layout(cfg: SynthConfig, widths_mm: List[float], depths_mm: List[float],
                          shapes: List[DefectShape], reflectivity: float = 0.8) -> List[DefectRecord]:
    """Lay defects out on a regular grid away from the scan edges, cycling through the given lists."""
    count = max(len(widths_mm), len(depths_mm), len(shapes))
    margin_frames = max(widths_mm) / cfg.calib.scan_step_mm + 8
    margin_beams = max(widths_mm) / cfg.calib.beam_pitch_mm / 2 + 4
    columns = max(1, int((cfg.n_beams - 2 * margin_beams) // (max(widths_mm) / cfg.calib.beam_pitch_mm + 6)) + 1)
    rows = int(np.ceil(count / columns))
    frame_positions = np.linspace(margin_frames, cfg.n_frames - 1 - margin_frames, rows) if rows > 1 else [cfg.n_frames / 2]
    beam_positions = np.linspace(margin_beams, cfg.n_beams - 1 - margin_beams, columns) if columns > 1 else [cfg.n_beams / 2]
    defects = []
    for i in range(count):
        defects.append(DefectRecord(
            id=i + 1,
            shape=shapes[i % len(shapes)],
            width_mm=widths_mm[i % len(widths_mm)],
            center_frame=float(round(frame_positions[i // columns])),
            center_beam=float(round(beam_positions[i % columns])),
            depth_mm=depths_mm[i % len(depths_mm)],
            reflectivity=reflectivity,
        ))
    return defects
