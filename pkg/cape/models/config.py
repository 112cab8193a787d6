"""Experiment configuration models.

Every field defaults to the standard desk configuration, so ``ExperimentConfig()``
is a complete, valid experiment.
"""

import sys
from enum import Enum
from typing import Any

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cape.autodiff import Activation
from cape.geometry import DepthSpacing

DEFAULT_CODE_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2)


class PEMode(str, Enum):
    """Coordinate frame the position embeddings are computed in."""

    GLOBAL = "global"
    CAMERA = "camera"


class TemporalMode(str, Enum):
    """How the previous frame takes part in a forward pass."""

    OFF = "off"
    SHARED = "shared_queries"
    SEPARATE = "separate_queries"


class FusionKind(str, Enum):
    """Operator combining the two frames' decoder embeddings."""

    CHANNEL_ATTENTION = "channel_attention"
    CONCAT_MLP = "concat_mlp"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False, frozen=True)


class ModelConfig(_Section):
    """Detector dimensions and mechanism switches."""

    channels: int = Field(default=32, ge=1, description="Embedding width C")
    num_queries: int = Field(default=16, ge=1, description="Object queries M")
    num_layers: int = Field(default=3, ge=0, description="Decoder layers L")
    num_heads: int = Field(default=4, ge=1, description="Attention heads h")
    num_classes: int = Field(default=3, ge=1, description="Object classes K")
    pe_mode: PEMode = Field(default=PEMode.CAMERA)
    bilateral: bool = Field(default=True, description="Decouple content and position logits")
    query_fpe: bool = Field(default=True, description="Decoder-embedding-guided query PE")
    key_fpe: bool = Field(default=True, description="Feature-guided key PE")
    per_view_softmax: bool = Field(
        default=False, description="Normalize attention within each view instead of jointly"
    )
    activation: Activation = Field(default=Activation.RELU)
    ffn_ratio: int = Field(default=4, ge=1)
    camera_range: float = Field(
        default=30.0, gt=0, description="Meters mapped to 1 for camera-frame coordinates"
    )

    @model_validator(mode="after")
    def _heads_divide_channels(self) -> Self:
        if self.channels % self.num_heads != 0:
            raise ValueError(
                f"channels ({self.channels}) must be divisible by num_heads ({self.num_heads})"
            )
        return self


class TemporalConfig(_Section):
    """Two-frame settings."""

    mode: TemporalMode = Field(default=TemporalMode.OFF)
    prev_loss: bool = Field(default=True, description="Supervise the previous-frame stream")
    fusion: FusionKind = Field(default=FusionKind.CHANNEL_ATTENTION)
    ego_embedding: bool = Field(default=True, description="Modulate by the ego-motion embedding")
    fuse_every_layer: bool = Field(default=True)


class LossConfig(_Section):
    """Loss weights."""

    lambda_prev: float = Field(default=0.1, ge=0, description="Previous-frame loss weight")
    lambda_cls: float = Field(default=2.0, ge=0, description="Classification loss weight")
    focal_alpha: float = Field(default=0.25, gt=0, lt=1)
    focal_gamma: float = Field(default=2.0, ge=0, description="0 or at least 1")
    code_weights: tuple[float, ...] = Field(default=DEFAULT_CODE_WEIGHTS)

    @field_validator("focal_gamma")
    @classmethod
    def _focusing_exponent(cls, value: float) -> float:
        if 0 < value < 1:
            raise ValueError(f"focal_gamma must be 0 or >= 1, got {value}")
        return value

    @field_validator("code_weights")
    @classmethod
    def _ten_weights(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if len(value) != 10:
            raise ValueError(f"code_weights needs 10 entries, got {len(value)}")
        if any(w < 0 for w in value):
            raise ValueError("code_weights must be nonnegative")
        return value


class OptimConfig(_Section):
    """Adaptive-moment optimizer with cosine-decayed step size."""

    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=2, ge=1, description="Scenes per gradient step")
    lr: float = Field(default=2e-3, gt=0)
    min_lr_ratio: float = Field(default=1e-3, ge=0, le=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    grad_clip: float = Field(default=10.0, gt=0, description="Global gradient-norm cap")
    log_every: int = Field(default=10, ge=1)
    checkpoint_every: int = Field(default=0, ge=0, description="0 writes only the final one")


class SceneConfig(_Section):
    """Synthetic scene generator settings."""

    bounds_min: tuple[float, float, float] = (-12.0, -12.0, 0.0)
    bounds_max: tuple[float, float, float] = (12.0, 12.0, 2.0)
    min_range: float = Field(default=3.0, ge=0, description="Keep-out radius around the ego")
    num_cameras: int = Field(default=4, ge=1)
    height: int = Field(default=8, ge=1)
    width: int = Field(default=16, ge=1)
    channels: int = Field(default=32, ge=1)
    depth_min: float = Field(default=1.0, gt=0)
    depth_max: float = Field(default=24.0, gt=0)
    depth_bins: int = Field(default=8, ge=1)
    depth_spacing: DepthSpacing = Field(default=DepthSpacing.UNIFORM)
    min_objects: int = Field(default=1, ge=0)
    max_objects: int = Field(default=4, ge=0)
    num_classes: int = Field(default=3, ge=1)
    max_speed: float = Field(default=2.0, ge=0, description="Object speed limit, m/s")
    ego_speed_max: float = Field(default=2.0, ge=0, description="Ego speed limit, m/s")
    ego_yaw_max_deg: float = Field(default=10.0, ge=0, description="Ego yaw change per gap")
    dt: float = Field(default=0.5, gt=0, description="Seconds between frames")
    camera_overlap: float = Field(default=0.25, ge=0, description="Extra field of view fraction")
    camera_height: float = Field(default=1.5)
    ring_radius: float = Field(default=0.5, ge=0)
    splat_sigma: float = Field(default=1.0, gt=0, description="Splat radius in pixels")
    depth_scale: float = Field(default=5.0, gt=0)
    noise_std: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _consistent(self) -> Self:
        if any(lo >= hi for lo, hi in zip(self.bounds_min, self.bounds_max, strict=True)):
            raise ValueError("Scene bounds must be nonempty on every axis")
        if self.depth_max <= self.depth_min:
            raise ValueError("depth_max must exceed depth_min")
        if self.max_objects < self.min_objects:
            raise ValueError("max_objects must be at least min_objects")
        return self

    @property
    def extent(self) -> tuple[float, float, float]:
        lo, hi = self.bounds_min, self.bounds_max
        return (hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2])


class DatasetConfig(_Section):
    """Seed ranges for training and held-out evaluation scenes."""

    train_scenes: int = Field(default=2000, ge=0)
    train_seed_start: int = Field(default=0, ge=0)
    eval_scenes: int = Field(default=100, ge=0)
    eval_seed_start: int = Field(default=1_000_000, ge=0)

    def train_seeds(self) -> range:
        return range(self.train_seed_start, self.train_seed_start + self.train_scenes)

    def eval_seeds(self) -> range:
        return range(self.eval_seed_start, self.eval_seed_start + self.eval_scenes)


class ExperimentConfig(BaseModel):
    """A complete, hashable description of one experiment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(default="desk")
    seed: int = Field(default=0, ge=0)
    model: ModelConfig = Field(default_factory=ModelConfig)
    temporal: TemporalConfig = Field(default_factory=TemporalConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)

    @model_validator(mode="after")
    def _model_matches_scene(self) -> Self:
        if self.model.channels != self.scene.channels:
            raise ValueError(
                f"model.channels ({self.model.channels}) must equal "
                f"scene.channels ({self.scene.channels})"
            )
        if self.model.num_classes != self.scene.num_classes:
            raise ValueError(
                f"model.num_classes ({self.model.num_classes}) must equal "
                f"scene.num_classes ({self.scene.num_classes})"
            )
        if self.scene.max_objects > self.model.num_queries:
            raise ValueError(
                f"scene.max_objects ({self.scene.max_objects}) exceeds "
                f"model.num_queries ({self.model.num_queries})"
            )
        return self

    @property
    def temporal_enabled(self) -> bool:
        return self.temporal.mode != TemporalMode.OFF

    def with_updates(self, **sections: Any) -> "ExperimentConfig":
        """Return a copy with some fields of the named sections replaced.

        Example: ``cfg.with_updates(model={"bilateral": False})``.
        """
        data = self.model_dump(mode="json")
        for section, values in sections.items():
            if isinstance(data.get(section), dict):
                data[section].update(values)
            else:
                data[section] = values
        return ExperimentConfig.model_validate(data)
