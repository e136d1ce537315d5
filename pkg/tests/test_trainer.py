import logging

import numpy as np
import pytest

from usseg.errors import ArgumentError, TrainingError
from usseg.models.volume import AxisCalib, ScanVolume, VolumeKind
from usseg.schemas.training import SamplerConfig, TrainConfig
from usseg.services import trainer_service
from usseg.services.prob_net import ProbNet
from usseg.services.trainer_service import EarlyStopping, build_dataset, count_windows

FW0 = AxisCalib(front_wall_index=0)
SAMPLER = SamplerConfig(window=8, stride=1, time_downsample=1, norm_scale=1.0)


def _weibull_volume(seed, shape=(60, 10, 10)):
    rng = np.random.default_rng(seed)
    return ScanVolume(0.3 * rng.weibull(2.0, size=shape), VolumeKind.ENVELOPE, FW0)


@pytest.mark.parametrize("length,window,stride,expected", [
    (64, 64, 1, 0),
    (129, 64, 64, 2),
    (192, 64, 1, 128),
    (10, 3, 4, 2),
])
def test_count_windows_examples(length, window, stride, expected):
    assert count_windows(length, window, stride) == expected


def test_count_windows_matches_enumeration(rng):
    for _ in range(200):
        length, window, stride = (int(v) for v in rng.integers(1, 60, size=3))
        offsets = [o for o in range(0, length, stride) if o + window < length]
        assert count_windows(length, window, stride) == len(offsets)


def test_count_windows_rejects_non_positive():
    with pytest.raises(ArgumentError):
        count_windows(10, 0, 1)
    with pytest.raises(ArgumentError):
        count_windows(10, 2, 0)


def test_dataset_size_from_down_sampled_lanes():
    vol = ScanVolume(np.ones((129, 5, 3)), VolumeKind.ENVELOPE, FW0)
    dataset = build_dataset([vol], SamplerConfig(window=64, stride=64, time_downsample=5))
    assert len(dataset) == 6


def test_corpus_max_maps_to_one(rng):
    vol = ScanVolume(rng.uniform(0, 7.0, (20, 4, 3)), VolumeKind.ENVELOPE, FW0)
    dataset = build_dataset([vol], SamplerConfig(window=4, stride=1, time_downsample=1))
    assert dataset.norm_scale == pytest.approx(vol.data.max())
    assert dataset.flat.max() == pytest.approx(1.0)


def test_larger_stride_is_subset(weibull_volume):
    sampler = SamplerConfig(window=8, stride=1, time_downsample=1)
    dense = build_dataset([weibull_volume], sampler)
    sparse = build_dataset([weibull_volume], sampler, stride=2)
    assert set(sparse.starts.tolist()) <= set(dense.starts.tolist())
    sizes = [len(build_dataset([weibull_volume], sampler, stride=s)) for s in [1, 2, 4, 8, 16, 32, 64, 128]]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_targets_follow_their_windows(rng):
    vols = [ScanVolume(rng.uniform(0, 1, (30, 6, 4)), VolumeKind.ENVELOPE, FW0),
            ScanVolume(rng.uniform(0, 1, (25, 6, 4)), VolumeKind.ENVELOPE, FW0)]
    sampler = SamplerConfig(window=8, stride=3, time_downsample=2)
    dataset = build_dataset(vols, sampler)
    reduced = [v.data[:, ::2, :] / dataset.norm_scale for v in vols]
    for i in rng.choice(len(dataset), size=100, replace=False):
        windows, targets = dataset.batch(np.array([i]))
        v, t, b, offset = dataset.locate(int(i))
        assert offset % 3 == 0
        np.testing.assert_allclose(windows[0], reduced[v][offset:offset + 8, t, b])
        assert targets[0] == pytest.approx(reduced[v][offset + 8, t, b])


def test_short_volume_contributes_nothing(caplog):
    short = ScanVolume(np.ones((8, 2, 2)), VolumeKind.ENVELOPE, FW0)
    with caplog.at_level(logging.WARNING, logger="usseg"):
        dataset = build_dataset([short], SAMPLER)
    assert len(dataset) == 0
    assert "contributes no samples" in caplog.text


def test_dataset_requires_envelopes():
    with pytest.raises(TrainingError):
        build_dataset([], SAMPLER)
    with pytest.raises(ArgumentError):
        build_dataset([ScanVolume(np.zeros((20, 2, 2)), VolumeKind.RF, FW0)], SAMPLER)


def test_early_stopping_counts_non_improving_epochs():
    stopper = EarlyStopping(patience=2)
    assert stopper.update(1.0, 1)
    assert not stopper.update(1.0, 2)
    assert stopper.update(0.5, 3)
    assert not stopper.update(0.7, 4)
    assert not stopper.should_stop
    assert not stopper.update(0.6, 5)
    assert stopper.should_stop
    assert stopper.best_epoch == 3


def test_zero_learning_rate_stops_after_patience(tiny_net_config):
    cfg = TrainConfig(batch_size=256, learning_rate=0.0, patience=2, max_epochs=20, val_stride=4)
    _, history = trainer_service.train(ProbNet(tiny_net_config), [_weibull_volume(1)], [_weibull_volume(2)],
                                       SAMPLER, cfg)
    assert len(history) == 3
    assert history.best_epoch == 1
    assert list(history.to_frame().columns) == trainer_service.HISTORY_COLUMNS


def test_training_is_deterministic(tiny_net_config):
    cfg = TrainConfig(batch_size=128, learning_rate=1e-3, patience=2, max_epochs=3, val_stride=4)
    runs = [trainer_service.train(ProbNet(tiny_net_config), [_weibull_volume(1)], [_weibull_volume(2)], SAMPLER, cfg)
            for _ in range(2)]
    a, b = (h.to_frame()[["train_nll", "val_nll"]] for _, h in runs)
    np.testing.assert_array_equal(a.to_numpy(), b.to_numpy())
    np.testing.assert_array_equal(runs[0][0].params, runs[1][0].params)


def test_returns_best_validation_snapshot(tiny_net_config):
    cfg = TrainConfig(batch_size=64, learning_rate=5e-2, patience=3, max_epochs=6, val_stride=4)
    val = [_weibull_volume(2)]
    best, history = trainer_service.train(ProbNet(tiny_net_config), [_weibull_volume(1)], val, SAMPLER, cfg)
    val_set = build_dataset(val, SAMPLER, stride=cfg.val_stride, norm_scale=best.norm_scale)
    frame = history.to_frame()
    assert trainer_service.dataset_nll(best, val_set) == pytest.approx(frame["val_nll"].min(), rel=1e-9)
    assert best.norm_scale == 1.0
    assert best.time_downsample == 1


def test_empty_training_set_is_an_error(tiny_net_config):
    short = ScanVolume(np.ones((8, 2, 2)), VolumeKind.ENVELOPE, FW0)
    with pytest.raises(TrainingError):
        trainer_service.train(ProbNet(tiny_net_config), [short], [_weibull_volume(2)], SAMPLER, TrainConfig())


def test_window_mismatch_is_rejected(tiny_net_config):
    with pytest.raises(ArgumentError):
        trainer_service.train(ProbNet(tiny_net_config), [_weibull_volume(1)], [_weibull_volume(2)],
                              SAMPLER.model_copy(update={"window": 16}), TrainConfig())


def test_learns_weibull_parameters_of_iid_lanes(small_net_config):
    cfg = TrainConfig(batch_size=100, learning_rate=1e-2, patience=5, max_epochs=30, val_stride=2)
    best, _ = trainer_service.train(ProbNet(small_net_config), [_weibull_volume(1)], [_weibull_volume(2)],
                                    SAMPLER, cfg)
    test_set = build_dataset([_weibull_volume(3)], SAMPLER)
    windows, _ = test_set.batch(np.arange(len(test_set)))
    p = best.predict(windows)
    assert np.median(p.scale) == pytest.approx(0.3, rel=0.15)
    assert np.median(p.shape) == pytest.approx(2.0, rel=0.15)


def test_stride_study_emits_one_row_per_stride(tiny_net_config):
    cfg = TrainConfig(batch_size=256, learning_rate=1e-3, patience=1, max_epochs=2, val_stride=4, test_stride=4)
    train_vols, val_vols, test_vols = [_weibull_volume(1)], [_weibull_volume(2)], [_weibull_volume(3)]
    table = trainer_service.stride_study(train_vols, val_vols, test_vols, [4], 1, tiny_net_config, SAMPLER, cfg)
    assert list(table.columns) == trainer_service.STRIDE_COLUMNS
    assert len(table) == 1
    row = table.iloc[0]
    assert row["stride"] == 4
    assert row["dataset_size"] == len(build_dataset(train_vols, SAMPLER, stride=4))
    assert np.isfinite(row["mean_test_ll"])
    assert row["std_test_ll"] == 0.0
