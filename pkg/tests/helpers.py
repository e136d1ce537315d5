import numpy as np

from usseg.models.distribution import WeibullParams
from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind


class ConstantPredictor:
    """Predicts the same Weibull distribution for every window and records its inputs."""

    def __init__(self, scale=0.3, shape=2.0, window=8, norm_scale=1.0):
        self.scale = scale
        self.shape = shape
        self.window = window
        self.norm_scale = norm_scale
        self.inputs = []

    def predict(self, windows):
        self.inputs.append(np.array(windows, copy=True))
        n = windows.shape[0]
        return WeibullParams(np.full(n, self.scale), np.full(n, self.shape))


class WindowMeanPredictor(ConstantPredictor):
    """Scale follows the window mean, so the output depends on the buffered history."""

    def predict(self, windows):
        self.inputs.append(np.array(windows, copy=True))
        return WeibullParams(windows.mean(axis=1) + 0.05, np.full(windows.shape[0], self.shape))


def envelope_volume(data, calib=None):
    return ScanVolume(np.asarray(data, dtype=np.float64), VolumeKind.ENVELOPE, calib or AxisCalib(front_wall_index=0))


def mask_volume(data, calib=None):
    return ScanVolume(np.asarray(data, dtype=np.float64), VolumeKind.MASK, calib or AxisCalib(front_wall_index=0))
