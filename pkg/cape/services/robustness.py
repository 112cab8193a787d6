"""Extrinsic-noise robustness sweeps.

For every noise level, each checkpoint is evaluated ``trials`` times with fresh
rotation noise on every camera, and the drop in mean AP against the clean
evaluation is averaged over trials.
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from cape.services.checkpoint import Checkpoint
from cape.services.evaluation import EvaluationService
from cape.utils import make_rng
from cape.utils.seeds import STREAM_NOISE

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.0, 2.0, 4.0, 8.0)

# nuScenes NDS drops reported at R_max = 4 degrees for the global-frame
# baseline and the camera-view temporal model.
PUBLISHED_DROPS = {"r_max_deg": 4.0, "petrv2": 0.0239, "cape_t": 0.0131}


class NoiseLevelResult(BaseModel):
    r_max_deg: float
    mean_ap: float = Field(description="Mean over trials")
    mean_drop: float = Field(description="Clean mAP minus noisy mAP, mean over trials")
    min_drop: float
    max_drop: float
    trials: int


class RobustnessCurve(BaseModel):
    label: str
    config_hash: str
    clean_map: float
    levels: list[NoiseLevelResult] = Field(default_factory=list)

    def drop_at(self, r_max_deg: float) -> float:
        for level in self.levels:
            if level.r_max_deg == r_max_deg:
                return level.mean_drop
        raise KeyError(r_max_deg)


class RobustnessReport(BaseModel):
    curves: list[RobustnessCurve] = Field(default_factory=list)
    num_scenes: int
    reference: dict[str, float] = Field(default_factory=lambda: dict(PUBLISHED_DROPS))


class RobustnessService:
    """Degradation curves of several checkpoints under the same noise draws."""

    def __init__(self, evaluation: EvaluationService | None = None) -> None:
        self.evaluation = evaluation or EvaluationService()

    def sweep(
        self,
        checkpoints: Sequence[tuple[str, Checkpoint]],
        levels: Sequence[float] = DEFAULT_LEVELS,
        trials: int = 20,
        seeds: Sequence[int] | None = None,
        noise_seed: int = 0,
    ) -> RobustnessReport:
        """Evaluate every checkpoint at every noise level.

        Trial ``k`` at level ``r`` uses the same noise stream for every
        checkpoint, so the models see identical perturbations.
        """
        if trials < 1:
            raise ValueError(f"trials must be at least 1, got {trials}")
        curves = []
        num_scenes = 0
        for label, checkpoint in checkpoints:
            detector = checkpoint.build_detector()
            clean = self.evaluation.evaluate(checkpoint, seeds=seeds, detector=detector)
            num_scenes = clean.num_scenes
            curve = RobustnessCurve(
                label=label, config_hash=checkpoint.config_hash, clean_map=clean.metrics.mean_ap
            )
            for r_max in levels:
                maps = []
                for trial in range(trials):
                    if r_max == 0:
                        maps.append(clean.metrics.mean_ap)
                        continue
                    rng = make_rng(noise_seed, STREAM_NOISE, round(r_max * 1000), trial)
                    noisy = self.evaluation.evaluate(
                        checkpoint, seeds=seeds, r_max_deg=r_max, noise_rng=rng, detector=detector
                    )
                    maps.append(noisy.metrics.mean_ap)
                drops = clean.metrics.mean_ap - np.asarray(maps)
                curve.levels.append(
                    NoiseLevelResult(
                        r_max_deg=r_max,
                        mean_ap=float(np.mean(maps)),
                        mean_drop=float(np.mean(drops)),
                        min_drop=float(np.min(drops)),
                        max_drop=float(np.max(drops)),
                        trials=trials,
                    )
                )
                logger.info("%s: R_max %.1f drop %.4f", label, r_max, curve.levels[-1].mean_drop)
            curves.append(curve)
        return RobustnessReport(curves=curves, num_scenes=num_scenes)

    @staticmethod
    def write(report: RobustnessReport, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path
