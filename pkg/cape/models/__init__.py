"""Data models."""

from cape.models.box import Box3D, Detection
from cape.models.config import (
    DatasetConfig,
    ExperimentConfig,
    FusionKind,
    LossConfig,
    ModelConfig,
    OptimConfig,
    PEMode,
    SceneConfig,
    TemporalConfig,
    TemporalMode,
)
from cape.models.metrics import DeskMetrics, MetricsRecord, StepRecord, threshold_key
from cape.models.scene import Frame, SceneSample

__all__ = [
    "Box3D",
    "DatasetConfig",
    "DeskMetrics",
    "Detection",
    "ExperimentConfig",
    "Frame",
    "FusionKind",
    "LossConfig",
    "MetricsRecord",
    "ModelConfig",
    "OptimConfig",
    "PEMode",
    "SceneConfig",
    "SceneSample",
    "StepRecord",
    "TemporalConfig",
    "TemporalMode",
    "threshold_key",
]
