"""
Probabilistic multi-head 1D CNN.

Every head applies `blocks` pairs of (stride-1 conv, LeakyReLU, stride-2
kernel-2 down-sampling conv, LeakyReLU) to the input window. Head outputs are
flattened, concatenated and passed through the fully connected stack, which
ends in two raw outputs mapped to Weibull (a, b) by softplus plus a floor.

All parameters live in one flat float64 vector. Layers only hold slots
(name, shape, offset) into it, so forward and backward are pure functions of
(parameters, input) and one model can be shared read-only between workers.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from usseg.config import settings
from usseg.errors import ArgumentError
from usseg.models.distribution import WeibullParams
from usseg.schemas.training import NetConfig
from usseg.services import weibull

logger = logging.getLogger(__name__)

# Parameter count reported for the reference architecture
REFERENCE_PARAM_COUNT = 486242

# Initial (a, b) on a zero window
INITIAL_SCALE = 0.5
INITIAL_SHAPE = 1.5


@dataclass(frozen=True)
class ParamSlot:
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def view(self, flat: np.ndarray) -> np.ndarray:
        return flat[self.offset:self.offset + self.size].reshape(self.shape)


class _Layout:
    """Allocates consecutive slots in the flat parameter vector."""

    def __init__(self):
        self.slots: List[ParamSlot] = []
        self.size = 0

    def add(self, name: str, shape: Tuple[int, ...]) -> ParamSlot:
        slot = ParamSlot(name, tuple(shape), self.size)
        self.slots.append(slot)
        self.size += slot.size
        return slot


class Conv1d:
    """1D convolution over (N, C, L) inputs, weight (C_out, C_in, k)."""

    def __init__(self, layout: _Layout, name: str, c_in: int, c_out: int, kernel: int, stride: int = 1):
        self.c_in, self.c_out, self.kernel, self.stride = c_in, c_out, kernel, stride
        if stride == 1:
            # "same" length; even kernels get the extra zero on the right
            self.pad = ((kernel - 1) // 2, kernel - 1 - (kernel - 1) // 2)
        else:
            self.pad = (0, 0)
        self.weight = layout.add(f"{name}.weight", (c_out, c_in, kernel))
        self.bias = layout.add(f"{name}.bias", (c_out,))

    @property
    def fan_in(self) -> int:
        return self.c_in * self.kernel

    def output_length(self, length: int) -> int:
        return (length + sum(self.pad) - self.kernel) // self.stride + 1

    def forward(self, params: np.ndarray, x: np.ndarray):
        n, _, length = x.shape
        padded = np.pad(x, ((0, 0), (0, 0), self.pad)) if sum(self.pad) else x
        windows = sliding_window_view(padded, self.kernel, axis=2)[:, :, ::self.stride, :]  # (N, C_in, L_out, k)
        l_out = windows.shape[2]
        cols = windows.transpose(0, 2, 1, 3).reshape(n * l_out, self.c_in * self.kernel)
        w = self.weight.view(params).reshape(self.c_out, -1)
        y = cols @ w.T + self.bias.view(params)
        return y.reshape(n, l_out, self.c_out).transpose(0, 2, 1), (cols, length)

    def backward(self, params: np.ndarray, grad: np.ndarray, cache, dy: np.ndarray) -> np.ndarray:
        cols, length = cache
        n, _, l_out = dy.shape
        dy_mat = dy.transpose(0, 2, 1).reshape(n * l_out, self.c_out)
        w = self.weight.view(params).reshape(self.c_out, -1)
        self.weight.view(grad)[...] += (dy_mat.T @ cols).reshape(self.weight.shape)
        self.bias.view(grad)[...] += dy_mat.sum(axis=0)

        dcols = (dy_mat @ w).reshape(n, l_out, self.c_in, self.kernel)
        padded_length = length + sum(self.pad)
        dpadded = np.zeros((n, self.c_in, padded_length))
        span = self.stride * (l_out - 1) + 1
        for j in range(self.kernel):
            dpadded[:, :, j:j + span:self.stride] += dcols[:, :, :, j].transpose(0, 2, 1)
        return dpadded[:, :, self.pad[0]:self.pad[0] + length]


class Dense:
    def __init__(self, layout: _Layout, name: str, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.weight = layout.add(f"{name}.weight", (n_out, n_in))
        self.bias = layout.add(f"{name}.bias", (n_out,))

    @property
    def fan_in(self) -> int:
        return self.n_in

    def forward(self, params: np.ndarray, x: np.ndarray):
        return x @ self.weight.view(params).T + self.bias.view(params), x

    def backward(self, params: np.ndarray, grad: np.ndarray, cache, dy: np.ndarray) -> np.ndarray:
        x = cache
        self.weight.view(grad)[...] += dy.T @ x
        self.bias.view(grad)[...] += dy.sum(axis=0)
        return dy @ self.weight.view(params)


class LeakyReLU:
    def __init__(self, slope: float):
        self.slope = slope

    def forward(self, params: np.ndarray, x: np.ndarray):
        positive = x > 0
        return np.where(positive, x, self.slope * x), positive

    def backward(self, params: np.ndarray, grad: np.ndarray, cache, dy: np.ndarray) -> np.ndarray:
        return np.where(cache, dy, self.slope * dy)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _softplus_inverse(y: float) -> float:
    return float(np.log(np.expm1(y)))


def expected_param_count(cfg: NetConfig) -> int:
    """Closed form: sum over layers of k * c_in * c_out + c_out."""
    total = 0
    for kernel in cfg.heads:
        c_in = 1
        for c_out in cfg.channels:
            total += kernel * c_in * c_out + c_out  # stride-1 conv
            total += 2 * c_out * c_out + c_out  # down-sampling conv
            c_in = c_out
    n_in = len(cfg.heads) * cfg.channels[-1] * (cfg.window // 2 ** cfg.blocks)
    for n_out in list(cfg.fc) + [2]:
        total += n_in * n_out + n_out
        n_in = n_out
    return total


class ProbNet:
    """Network definition plus its flat parameter vector."""

    def __init__(self, config: Optional[NetConfig] = None, params: Optional[np.ndarray] = None):
        self.config = config or NetConfig()
        self.norm_scale = math.nan  # set by training; amplitudes are divided by it
        self.time_downsample = 1  # time down-sampling the model was trained with

        cfg = self.config
        layout = _Layout()
        self.heads: List[list] = []
        for h, kernel in enumerate(cfg.heads):
            layers = []
            c_in = 1
            for blk, c_out in enumerate(cfg.channels):
                layers.append(Conv1d(layout, f"head{h}.block{blk}.conv", c_in, c_out, kernel))
                layers.append(LeakyReLU(cfg.leaky_slope))
                layers.append(Conv1d(layout, f"head{h}.block{blk}.down", c_out, c_out, 2, stride=2))
                layers.append(LeakyReLU(cfg.leaky_slope))
                c_in = c_out
            self.heads.append(layers)

        self.fc_layers = []
        n_in = len(cfg.heads) * cfg.channels[-1] * (cfg.window // 2 ** cfg.blocks)
        for i, n_out in enumerate(cfg.fc):
            self.fc_layers.append(Dense(layout, f"fc{i}", n_in, n_out))
            self.fc_layers.append(LeakyReLU(cfg.leaky_slope))
            n_in = n_out
        self.output_layer = Dense(layout, "out", n_in, 2)
        self.fc_layers.append(self.output_layer)

        self.slots = layout.slots
        self.param_count = layout.size
        if params is None:
            self.params = self._initial_params()
        else:
            params = np.asarray(params, dtype=np.float64).ravel()
            if params.size != self.param_count:
                raise ArgumentError(f"expected {self.param_count} parameters, got {params.size}")
            self.params = params.copy()

    @property
    def window(self) -> int:
        return self.config.window

    def param_layout(self) -> List[Tuple[str, Tuple[int, ...], int]]:
        return [(s.name, s.shape, s.offset) for s in self.slots]

    def _trainable_layers(self):
        for layers in self.heads:
            for layer in layers:
                if hasattr(layer, "weight"):
                    yield layer
        for layer in self.fc_layers:
            if hasattr(layer, "weight"):
                yield layer

    def _initial_params(self) -> np.ndarray:
        rng = np.random.default_rng(self.config.init_seed)
        params = np.zeros(self.param_count)
        for layer in self._trainable_layers():
            bound = 1.0 / math.sqrt(layer.fan_in)
            layer.weight.view(params)[...] = rng.uniform(-bound, bound, layer.weight.shape)
            layer.bias.view(params)[...] = rng.uniform(-bound, bound, layer.bias.shape)

        raw = self._raw_forward(params, np.zeros((1, self.window)))[0][0]
        target = np.array([
            _softplus_inverse(INITIAL_SCALE - self.config.output_floor),
            _softplus_inverse(INITIAL_SHAPE - self.config.output_floor),
        ])
        self.output_layer.bias.view(params)[...] += target - raw
        return params

    def copy(self) -> "ProbNet":
        clone = ProbNet(self.config, self.params)
        clone.norm_scale = self.norm_scale
        clone.time_downsample = self.time_downsample
        return clone

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.window:
            raise ArgumentError(f"expected input of shape (N, {self.window}), got {x.shape}")
        return x

    def _raw_forward(self, params: np.ndarray, x: np.ndarray):
        n = x.shape[0]
        inputs = x[:, None, :]
        head_caches, flats, head_shapes = [], [], []
        for layers in self.heads:
            h = inputs
            caches = []
            for layer in layers:
                h, cache = layer.forward(params, h)
                caches.append(cache)
            head_caches.append(caches)
            head_shapes.append(h.shape)
            flats.append(h.reshape(n, -1))
        z = np.concatenate(flats, axis=1)
        fc_caches = []
        for layer in self.fc_layers:
            z, cache = layer.forward(params, z)
            fc_caches.append(cache)
        return z, (head_caches, head_shapes, fc_caches)

    def _link(self, raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        floor = self.config.output_floor
        return _softplus(raw[:, 0]) + floor, _softplus(raw[:, 1]) + floor

    def forward(self, x: np.ndarray, params: Optional[np.ndarray] = None) -> WeibullParams:
        """Predicted Weibull parameters for a batch of N windows."""
        x = self._check_input(x)
        raw, _ = self._raw_forward(self.params if params is None else params, x)
        a, b = self._link(raw)
        return WeibullParams(a, b)

    def loss_and_grad(self, x: np.ndarray, targets: np.ndarray,
                      params: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
        """Batch-mean Weibull NLL and its gradient with respect to every parameter."""
        params = self.params if params is None else params
        x = self._check_input(x)
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if targets.size != x.shape[0]:
            raise ArgumentError(f"{x.shape[0]} windows but {targets.size} targets")
        n = x.shape[0]

        raw, (head_caches, head_shapes, fc_caches) = self._raw_forward(params, x)
        a, b = self._link(raw)
        loss = weibull.nll(targets, a, b)
        d_a, d_b = weibull.nll_grad(targets, a, b)

        d_raw = np.empty_like(raw)
        d_raw[:, 0] = d_a / n * expit(raw[:, 0])
        d_raw[:, 1] = d_b / n * expit(raw[:, 1])

        grad = np.zeros_like(params)
        dz = d_raw
        for layer, cache in zip(reversed(self.fc_layers), reversed(fc_caches)):
            dz = layer.backward(params, grad, cache, dz)

        start = 0
        for layers, caches, shape in zip(self.heads, head_caches, head_shapes):
            width = int(np.prod(shape[1:]))
            dh = dz[:, start:start + width].reshape(shape)
            start += width
            for layer, cache in zip(reversed(layers), reversed(caches)):
                dh = layer.backward(params, grad, cache, dh)
        return loss, grad

    def backward(self, x: np.ndarray, targets: np.ndarray) -> np.ndarray:
        return self.loss_and_grad(x, targets)[1]

    def predict(self, windows: np.ndarray, chunk: Optional[int] = None) -> WeibullParams:
        """Forward pass in chunks to bound memory on whole-frame batches."""
        windows = self._check_input(windows)
        chunk = chunk or settings.PREDICT_CHUNK
        scales, shapes = [], []
        for start in range(0, windows.shape[0], chunk):
            p = self.forward(windows[start:start + chunk])
            scales.append(p.scale)
            shapes.append(p.shape)
        return WeibullParams(np.concatenate(scales), np.concatenate(shapes))

    def describe(self) -> str:
        return (f"ProbNet(heads={self.config.heads}, channels={self.config.channels}, fc={self.config.fc}, "
                f"params={self.param_count}, reference={REFERENCE_PARAM_COUNT})")
