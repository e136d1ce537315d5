from dataclasses import dataclass

import numpy as np

from usseg.errors import WeibullDomainError


@dataclass(frozen=True)
class WeibullParams:
    """Batch of two-parameter Weibull distributions: scale a and shape b."""
    scale: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.scale, dtype=np.float64)
        b = np.asarray(self.shape, dtype=np.float64)
        if a.shape != b.shape:
            raise WeibullDomainError(f"scale shape {a.shape} != shape shape {b.shape}")
        if np.any(~(a > 0)) or np.any(~(b > 0)):
            raise WeibullDomainError("Weibull scale and shape must be strictly positive")
        object.__setattr__(self, "scale", a)
        object.__setattr__(self, "shape", b)

    def __len__(self) -> int:
        return int(self.scale.size)

    def __getitem__(self, index) -> "WeibullParams":
        return WeibullParams(self.scale[index], self.shape[index])

    def rescaled(self, k: float) -> "WeibullParams":
        """Scale equivariance: Weibull(k*a, b) is the law of k*X."""
        return WeibullParams(self.scale * k, self.shape)
