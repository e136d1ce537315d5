import numpy as np
import pytest

from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind
from usseg.schemas.synth import SynthConfig
from usseg.schemas.training import NetConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def calib():
    return AxisCalib()


@pytest.fixture
def tiny_net_config():
    return NetConfig(window=8, heads=[3], channels=[2], fc=[4])


@pytest.fixture
def small_net_config():
    return NetConfig(window=8, heads=[3, 5], channels=[4], fc=[16, 8])


@pytest.fixture
def small_synth():
    """Thin plate whose back wall fits the short time axis."""
    return SynthConfig(n_frames=40, n_time=120, n_beams=8, thickness_mm=1.0)


@pytest.fixture
def weibull_volume(rng):
    """Envelope volume with i.i.d. Weibull(0.3, 2.0) amplitudes."""
    data = 0.3 * rng.weibull(2.0, size=(100, 40, 30))
    return ScanVolume(data, VolumeKind.ENVELOPE, AxisCalib(front_wall_index=0))
