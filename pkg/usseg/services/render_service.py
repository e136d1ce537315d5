import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
import plotly.express as px
from PIL import Image

from usseg.errors import ArgumentError
from usseg.models.volume import ScanVolume, VolumeKind
from usseg.services import volume_service

logger = logging.getLogger(__name__)

# Scatter3d of more voxels than this is thinned with a regular stride
MAX_SCATTER_POINTS = 200000


def to_gray(field: np.ndarray, vmax: Optional[float] = None) -> np.ndarray:
    """round(255 * clamp(v / vmax, 0, 1)) as uint8; vmax defaults to the field maximum."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ArgumentError(f"expected a 2D field, got shape {field.shape}")
    if vmax is None:
        vmax = float(field.max()) if field.size and field.max() > 0 else 1.0
    if not vmax > 0:
        raise ArgumentError(f"vmax must be > 0, got {vmax}")
    scaled = np.clip(field / vmax, 0.0, 1.0)
    return np.floor(255.0 * scaled + 0.5).astype(np.uint8)


def write_pgm(field: np.ndarray, path: str, vmax: Optional[float] = None) -> Path:
    """Binary P5 greymap, maxval 255, one row per field row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_gray(field, vmax)).save(path, format="PPM")
    logger.info("Wrote %s", path)
    return path


def cscan_field(vol: ScanVolume, gate: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Frames x beams projection: peak amplitude for envelopes, OR for masks."""
    gate = gate or volume_service.full_gate(vol)
    if vol.kind == VolumeKind.MASK:
        return volume_service.cscan_mask(vol, gate).astype(np.float64)
    if vol.kind == VolumeKind.RF:
        vol = volume_service.envelope(vol)
    return volume_service.cscan_amplitude(vol, gate)


def cscan_figure(vol: ScanVolume, gate: Optional[Tuple[int, int]] = None, title: str = "C-scan"):
    field = cscan_field(vol, gate)
    return px.imshow(
        field,
        x=vol.calib.beam_mm(np.arange(vol.n_beams)),
        y=vol.calib.frame_mm(np.arange(vol.n_frames)),
        color_continuous_scale="gray",
        title=title,
        labels={"x": "Beam (mm)", "y": "Scan (mm)", "color": "Amplitude"},
        aspect="equal",
    )


def bscan_figure(vol: ScanVolume, frame: int, title: Optional[str] = None):
    field = volume_service.bscan(vol, frame)
    return px.imshow(
        field,
        x=vol.calib.beam_mm(np.arange(vol.n_beams)),
        y=vol.calib.depth_mm(np.arange(vol.n_time)),
        color_continuous_scale="gray",
        title=title or f"B-scan at frame {frame}",
        labels={"x": "Beam (mm)", "y": "Depth (mm)", "color": "Amplitude"},
        aspect="auto",
    )


def mask_figure(mask: ScanVolume, title: str = "Segmented defects"):
    """3D scatter of every segmented voxel in physical coordinates."""
    if mask.kind != VolumeKind.MASK:
        raise ArgumentError(f"expected a mask volume, got {mask.kind.value}")
    voxels = np.argwhere(mask.data > 0)
    if len(voxels) > MAX_SCATTER_POINTS:
        voxels = voxels[::int(np.ceil(len(voxels) / MAX_SCATTER_POINTS))]
    df = pd.DataFrame({
        "scan_mm": mask.calib.frame_mm(voxels[:, 0]),
        "depth_mm": mask.calib.depth_mm(voxels[:, 1]),
        "beam_mm": mask.calib.beam_mm(voxels[:, 2]),
    })
    fig = px.scatter_3d(df, x="scan_mm", y="beam_mm", z="depth_mm", color="depth_mm", title=title,
                        labels={"scan_mm": "Scan (mm)", "beam_mm": "Beam (mm)", "depth_mm": "Depth (mm)"})
    fig.update_traces(marker={"size": 2})
    fig.update_scenes(zaxis_autorange="reversed")
    return fig


def write_html(fig, path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info("Wrote %s", path)
    return path
