"""Evaluation and training record models."""

from pydantic import BaseModel, ConfigDict, Field

METRICS_SCHEMA_VERSION = 1
DISTANCE_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)


class DeskMetrics(BaseModel):
    """Center-distance detection metrics (a scaled-down analog of nuScenes mAP)."""

    model_config = ConfigDict(frozen=True)

    ap: dict[str, float] = Field(description="AP keyed by distance threshold in meters")
    mean_ap: float = Field(description="Mean over thresholds (desk_map)")
    mate: float | None = Field(default=None, description="Mean translation error at 2 m")
    mave: float | None = Field(default=None, description="Mean velocity error at 2 m")
    num_predictions: int = 0
    num_ground_truths: int = 0

    def ap_at(self, threshold: float) -> float:
        return self.ap[threshold_key(threshold)]


class MetricsRecord(BaseModel):
    """One evaluation result as written to disk."""

    schema_version: int = METRICS_SCHEMA_VERSION
    config_hash: str
    seed: int
    split: str = Field(description="train or eval")
    num_scenes: int
    metrics: DeskMetrics


class StepRecord(BaseModel):
    """One line of a training run's metrics.jsonl."""

    step: int
    lr: float
    loss: float
    terms: dict[str, float] = Field(default_factory=dict)
    grad_norm: float


def threshold_key(threshold: float) -> str:
    """Canonical dictionary key for a distance threshold, e.g. ``"0.5"``, ``"2.0"``."""
    return f"{float(threshold):.1f}"
