"""
Two-parameter Weibull mathematics.

All functions broadcast over numpy arrays. Amplitudes below TARGET_FLOOR are
clamped to it before evaluation, since enveloped data can be exactly zero where
the log-density diverges for shape < 1.
"""
from typing import Tuple, Union

import numpy as np
from scipy.special import gamma

from usseg.errors import ArgumentError, WeibullDomainError
from usseg.models.distribution import WeibullParams

TARGET_FLOOR = 1e-6

ArrayLike = Union[float, np.ndarray]


def _check_params(a: ArrayLike, b: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise WeibullDomainError("Weibull scale and shape must be strictly positive")
    return a, b


def _clamp(x: ArrayLike) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), TARGET_FLOOR)


def log_pdf(x: ArrayLike, a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """ln(b/a) + (b-1) ln(x/a) - (x/a)^b"""
    a, b = _check_params(a, b)
    log_ratio = np.log(_clamp(x)) - np.log(a)
    return np.log(b) - np.log(a) + (b - 1.0) * log_ratio - np.exp(b * log_ratio)


def nll(xs: ArrayLike, a: ArrayLike, b: ArrayLike) -> float:
    """Batch-mean negative log-likelihood."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise ArgumentError("nll needs a non-empty batch")
    a, b = _check_params(a, b)
    if a.shape != xs.shape and a.size != 1:
        raise ArgumentError(f"targets {xs.shape} and parameters {a.shape} differ in length")
    return float(-np.mean(log_pdf(xs, a, b)))


def nll_grad(x: ArrayLike, a: ArrayLike, b: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise partials of -log_pdf with respect to (a, b)."""
    a, b = _check_params(a, b)
    log_ratio = np.log(_clamp(x)) - np.log(a)
    powered = np.exp(b * log_ratio)  # (x/a)^b
    d_a = b / a * (1.0 - powered)
    d_b = -1.0 / b - log_ratio + powered * log_ratio
    return d_a, d_b


def mean(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = _check_params(a, b)
    return a * gamma(1.0 + 1.0 / b)


def mode(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = _check_params(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = a * np.power(np.maximum(b - 1.0, 0.0) / b, 1.0 / b)
    return np.where(b > 1.0, value, 0.0)


def cdf(x: ArrayLike, a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = _check_params(a, b)
    x = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    return -np.expm1(-np.power(x / a, b))


def quantile(a: ArrayLike, b: ArrayLike, c: ArrayLike) -> np.ndarray:
    """Inverse CDF: a (-ln(1-c))^(1/b)."""
    a, b = _check_params(a, b)
    c = np.asarray(c, dtype=np.float64)
    if np.any(~((c > 0) & (c < 1))):
        raise ArgumentError("quantile level must lie in the open interval (0, 1)")
    return a * np.power(-np.log1p(-c), 1.0 / b)


def params_mean(p: WeibullParams) -> np.ndarray:
    return mean(p.scale, p.shape)


def params_quantile(p: WeibullParams, c: float) -> np.ndarray:
    return quantile(p.scale, p.shape, c)
