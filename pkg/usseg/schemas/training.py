from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NetConfig(BaseModel):
    """Multi-head 1D convolutional network predicting Weibull (a, b)."""
    model_config = ConfigDict(extra="forbid")

    window: int = Field(64, ge=2)
    heads: List[int] = Field(default_factory=lambda: [3, 5, 9, 15], min_length=1)  # kernel sizes
    channels: List[int] = Field(default_factory=lambda: [8, 16], min_length=1)  # one entry per block
    fc: List[int] = Field(default_factory=lambda: [128, 64])
    leaky_slope: float = Field(0.01, ge=0)
    output_floor: float = Field(1e-4, gt=0)
    init_seed: int = 0

    @property
    def blocks(self) -> int:
        return len(self.channels)

    @model_validator(mode="after")
    def check_shapes(self):
        if any(k < 1 for k in self.heads):
            raise ValueError("kernel sizes must be >= 1")
        if any(c < 1 for c in self.channels + self.fc):
            raise ValueError("channel and fc widths must be >= 1")
        if self.window % (2 ** self.blocks) != 0:
            raise ValueError(f"window {self.window} must be divisible by 2**blocks = {2 ** self.blocks}")
        return self


class SamplerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window: int = Field(64, ge=2)
    stride: int = Field(64, ge=1)
    time_downsample: int = Field(5, ge=1)
    norm_scale: Optional[float] = Field(None, gt=0)  # None: max envelope of the training corpus


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(65536, ge=1)
    learning_rate: float = Field(1e-6, ge=0)
    patience: int = Field(3, ge=1)
    max_epochs: int = Field(50, ge=1)
    seed: int = 0
    val_stride: int = Field(64, ge=1)
    test_stride: int = Field(1, ge=1)
