from dataclasses import dataclass
from typing import Tuple

import numpy as np

from usseg.errors import ArgumentError


@dataclass
class AdamState:
    """First and second moment estimates plus the step counter."""
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new parameters and new state; inputs are not mutated."""
    if not (state.m.shape == state.v.shape == params.shape == grads.shape):
        raise ArgumentError(
            f"Adam dimensions differ: m {state.m.shape}, v {state.v.shape}, "
            f"params {params.shape}, grads {grads.shape}"
        )
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * (grads * grads)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


class Adam:
    """Stateful wrapper around adam_step for a single flat parameter vector."""

    def __init__(self, n_params: int, lr: float = 1e-6, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros(n_params)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        params, self.state = adam_step(self.state, params, grads, self.lr, self.beta1, self.beta2, self.eps)
        return params
