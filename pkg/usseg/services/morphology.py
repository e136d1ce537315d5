import logging
import math

import numpy as np
from skimage import measure

from usseg.errors import ArgumentError
from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind

logger = logging.getLogger(__name__)

# skimage connectivity is expressed as the number of orthogonal hops
_CONNECTIVITY = {4: 1, 8: 2}


def _skimage_connectivity(connectivity: int) -> int:
    if connectivity not in _CONNECTIVITY:
        raise ArgumentError(f"connectivity must be 4 or 8, got {connectivity}")
    return _CONNECTIVITY[connectivity]


def label_components(field: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Labels 1..n for the connected components of a binary 2D field, 0 for background."""
    field = np.asarray(field)
    if field.ndim != 2:
        raise ArgumentError(f"expected a 2D field, got shape {field.shape}")
    return measure.label(field.astype(bool), connectivity=_skimage_connectivity(connectivity), background=0)


def _open_plane(plane: np.ndarray, min_size: int, connectivity: int) -> np.ndarray:
    labels = label_components(plane, connectivity)
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_size
    keep[0] = False
    return keep[labels]


def area_opening(vol: ScanVolume, min_size: int, connectivity: int = 8) -> ScanVolume:
    """Per depth plane, drop components with fewer than `min_size` pixels."""
    if vol.kind != VolumeKind.MASK:
        raise ArgumentError(f"area opening needs a mask volume, got {vol.kind.value}")
    if min_size < 1:
        raise ArgumentError(f"area filter must be >= 1, got {min_size}")
    _skimage_connectivity(connectivity)

    out = np.zeros(vol.shape, dtype=bool)
    mask = vol.data.astype(bool)
    for t in np.flatnonzero(mask.any(axis=(0, 2))):
        out[:, t, :] = _open_plane(mask[:, t, :], min_size, connectivity)
    logger.debug("Area opening (filter %d) kept %d of %d voxels", min_size, int(out.sum()), int(mask.sum()))
    return vol.replace(data=out.astype(np.float64))


def filter_from_min_size(min_defect_mm: float, calib: AxisCalib) -> int:
    """Pixel count of a disc of the given diameter on the frame x beam grid."""
    if not min_defect_mm > 0:
        raise ArgumentError(f"minimum defect size must be > 0 mm, got {min_defect_mm}")
    return int(math.floor(math.pi * (min_defect_mm / 2.0) ** 2 / (calib.scan_step_mm * calib.beam_pitch_mm)))
