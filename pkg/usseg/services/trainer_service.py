"""
Self-supervised training on clean scan sequences.

A lane is the sequence of amplitudes along the scan (frame) axis at one fixed
(time, beam) coordinate. Windows of W consecutive values are cut from every
lane at a configurable stride and the value that follows each window is the
regression target.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from usseg.config import settings
from usseg.errors import ArgumentError, TrainingError
from usseg.models.volume import ScanVolume, VolumeKind
from usseg.schemas.training import NetConfig, SamplerConfig, TrainConfig
from usseg.services.optimizer import Adam
from usseg.services.prob_net import REFERENCE_PARAM_COUNT, ProbNet
from usseg.services.volume_service import downsample_time
from usseg.services.weibull import log_pdf

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_nll", "val_nll", "seconds"]
STRIDE_COLUMNS = ["stride", "dataset_size", "mean_test_ll", "std_test_ll", "repeats"]


def count_windows(length: int, window: int, stride: int) -> int:
    """Windows starting at 0, S, 2S, ... whose target index offset+W stays inside the lane."""
    if window < 1 or stride < 1:
        raise ArgumentError(f"window and stride must be >= 1, got {window} and {stride}")
    if length <= window:
        return 0
    return (length - window - 1) // stride + 1


def lane_matrix(data: np.ndarray) -> np.ndarray:
    """(frames, time, beams) -> (time * beams, frames), lanes ordered by (time, beam)."""
    n_frames, n_time, n_beams = data.shape
    return data.transpose(1, 2, 0).reshape(n_time * n_beams, n_frames)


@dataclass
class SequenceDataset:
    """All lanes of a corpus in one flat array plus the start index of every window."""
    flat: np.ndarray
    starts: np.ndarray
    window: int
    stride: int
    norm_scale: float
    volume_offsets: np.ndarray  # flat index where each volume's lanes begin
    volume_shapes: List[Tuple[int, int, int]]  # down-sampled shapes

    def __len__(self) -> int:
        return int(self.starts.size)

    def batch(self, index: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Windows (N, W) and targets (N,) for the given sample indices."""
        starts = self.starts[index]
        windows = self.flat[starts[:, None] + np.arange(self.window)]
        targets = self.flat[starts + self.window]
        return windows, targets

    def locate(self, i: int) -> Tuple[int, int, int, int]:
        """(volume, time, beam, offset) of sample i."""
        start = int(self.starts[i])
        v = int(np.searchsorted(self.volume_offsets, start, side="right")) - 1
        n_frames, _, n_beams = self.volume_shapes[v]
        lane, offset = divmod(start - int(self.volume_offsets[v]), n_frames)
        t, b = divmod(lane, n_beams)
        return v, t, b, offset


def build_dataset(vols: Sequence[ScanVolume], cfg: SamplerConfig, stride: Optional[int] = None,
                  norm_scale: Optional[float] = None) -> SequenceDataset:
    """Windowed (input, target) pairs over every lane of every volume.

    The normalization scale is, in order of precedence, the explicit argument,
    the sampler config value, or the maximum amplitude of the down-sampled corpus.
    """
    stride = cfg.stride if stride is None else stride
    if not vols:
        raise TrainingError("no volumes given")
    for v in vols:
        if v.kind != VolumeKind.ENVELOPE:
            raise ArgumentError(f"training volumes must be enveloped, got {v.kind.value}")

    reduced = [downsample_time(v, cfg.time_downsample).data for v in vols]
    scale = norm_scale if norm_scale is not None else cfg.norm_scale
    if scale is None:
        scale = float(max(d.max() for d in reduced))
    if not (scale > 0 and math.isfinite(scale)):
        raise TrainingError(f"normalization scale must be positive and finite, got {scale}")

    flats, starts, offsets, shapes = [], [], [], []
    base = 0
    for i, data in enumerate(reduced):
        n_frames, n_time, n_beams = data.shape
        lanes = lane_matrix(data) / scale
        n = count_windows(n_frames, cfg.window, stride)
        if n == 0:
            logger.warning("Volume %d has %d frames <= window %d and contributes no samples",
                           i, n_frames, cfg.window)
        lane_base = base + np.arange(lanes.shape[0]) * n_frames
        starts.append((lane_base[:, None] + np.arange(n)[None, :] * stride).ravel())
        flats.append(lanes.ravel())
        offsets.append(base)
        shapes.append(data.shape)
        base += lanes.size

    dataset = SequenceDataset(
        flat=np.concatenate(flats),
        starts=np.concatenate(starts).astype(np.int64),
        window=cfg.window,
        stride=stride,
        norm_scale=scale,
        volume_offsets=np.asarray(offsets, dtype=np.int64),
        volume_shapes=shapes,
    )
    logger.debug("Built %d windows from %d volumes (stride %d, scale %.6g)", len(dataset), len(vols), stride, scale)
    return dataset


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def dataset_nll(model: ProbNet, dataset: SequenceDataset, params: Optional[np.ndarray] = None) -> float:
    """Mean Weibull NLL over the whole dataset."""
    if len(dataset) == 0:
        raise TrainingError("cannot evaluate on an empty dataset")
    total = 0.0
    for idx in _chunks(len(dataset), settings.PREDICT_CHUNK):
        x, y = dataset.batch(idx)
        p = model.forward(x, params)
        total -= float(np.sum(log_pdf(y, p.scale, p.shape)))
    return total / len(dataset)


def evaluate_log_likelihood(model: ProbNet, dataset: SequenceDataset) -> float:
    """Mean per-sample log-likelihood, in normalized amplitude units."""
    return -dataset_nll(model, dataset)


def _batch_loss_and_grad(model: ProbNet, params: np.ndarray, dataset: SequenceDataset,
                         index: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean loss and gradient over one mini-batch, accumulated over fixed-order chunks."""
    loss = 0.0
    grad = np.zeros_like(params)
    n = index.size
    for start in range(0, n, settings.PREDICT_CHUNK):
        part = index[start:start + settings.PREDICT_CHUNK]
        x, y = dataset.batch(part)
        part_loss, part_grad = model.loss_and_grad(x, y, params)
        weight = part.size / n
        loss += part_loss * weight
        grad += part_grad * weight
    return loss, grad


class EarlyStopping:
    """Stops once the monitored value has not strictly decreased for `patience` epochs."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ArgumentError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = math.inf
        self.best_epoch: Optional[int] = None
        self.bad_epochs = 0

    def update(self, value: float, epoch: int) -> bool:
        """Record one epoch; True when it is a new best."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass
class TrainHistory:
    rows: List[dict] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def append(self, epoch: int, train_nll: float, val_nll: float, seconds: float) -> None:
        self.rows.append({"epoch": epoch, "train_nll": train_nll, "val_nll": val_nll, "seconds": seconds})

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=HISTORY_COLUMNS)


def train(model: ProbNet, train_vols: Sequence[ScanVolume], val_vols: Sequence[ScanVolume],
          sampler: SamplerConfig, cfg: TrainConfig) -> Tuple[ProbNet, TrainHistory]:
    """Fit the model with Adam and early stopping; returns the best-validation snapshot."""
    if model.window != sampler.window:
        raise ArgumentError(f"model window {model.window} differs from sampler window {sampler.window}")
    train_set = build_dataset(train_vols, sampler)
    if len(train_set) == 0:
        raise TrainingError("training set is empty; volumes need more frames than the window")
    val_set = build_dataset(val_vols, sampler, stride=cfg.val_stride, norm_scale=train_set.norm_scale)
    if len(val_set) == 0:
        raise TrainingError("validation set is empty; volumes need more frames than the window")

    logger.info("Training %s on %d windows (validation %d)", model.describe(), len(train_set), len(val_set))
    if model.param_count != REFERENCE_PARAM_COUNT:
        logger.info("Parameter count %d differs from the reference %d", model.param_count, REFERENCE_PARAM_COUNT)

    work = model.copy()
    work.norm_scale = train_set.norm_scale
    work.time_downsample = sampler.time_downsample
    best = work.copy()

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(work.param_count, lr=cfg.learning_rate)
    stopper = EarlyStopping(cfg.patience)
    history = TrainHistory()
    params = work.params.copy()

    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_set))
        weighted = 0.0
        for start in range(0, order.size, cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            loss, grad = _batch_loss_and_grad(work, params, train_set, index)
            params = optimizer.step(params, grad)
            weighted += loss * index.size
        work.params = params
        train_nll = weighted / order.size
        val_nll = dataset_nll(work, val_set)
        seconds = time.perf_counter() - started
        history.append(epoch, train_nll, val_nll, seconds)
        logger.info("Epoch %d: train NLL %.6f, validation NLL %.6f (%.1fs)", epoch, train_nll, val_nll, seconds)

        if stopper.update(val_nll, epoch):
            best = work.copy()
        if stopper.should_stop:
            logger.info("Early stop after epoch %d; best epoch %d", epoch, stopper.best_epoch)
            break

    history.best_epoch = stopper.best_epoch
    return best, history


def stride_study(train_vols: Sequence[ScanVolume], val_vols: Sequence[ScanVolume],
                 test_vols: Sequence[ScanVolume], strides: Sequence[int], repeats: int,
                 net_cfg: NetConfig, sampler: SamplerConfig, cfg: TrainConfig) -> pd.DataFrame:
    """Train `repeats` models per stride and score each on the test corpus at the test stride."""
    if repeats < 1:
        raise ArgumentError(f"repeats must be >= 1, got {repeats}")
    rows = []
    for stride in strides:
        stride_sampler = sampler.model_copy(update={"stride": stride})
        dataset_size = len(build_dataset(train_vols, stride_sampler))
        scores = []
        for r in range(repeats):
            model = ProbNet(net_cfg.model_copy(update={"init_seed": net_cfg.init_seed + r}))
            trained, _ = train(model, train_vols, val_vols, stride_sampler, cfg.model_copy(update={"seed": cfg.seed + r}))
            test_set = build_dataset(test_vols, stride_sampler, stride=cfg.test_stride, norm_scale=trained.norm_scale)
            scores.append(evaluate_log_likelihood(trained, test_set))
        rows.append({
            "stride": stride,
            "dataset_size": dataset_size,
            "mean_test_ll": float(np.mean(scores)),
            "std_test_ll": float(np.std(scores)),
            "repeats": repeats,
        })
        logger.info("Stride %d: %d windows, test LL %.6f", stride, dataset_size, rows[-1]["mean_test_ll"])
    return pd.DataFrame(rows, columns=STRIDE_COLUMNS)
