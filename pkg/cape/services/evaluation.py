"""Held-out evaluation of a checkpoint, optionally under extrinsic noise."""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from cape.detection import decode_predictions, evaluate
from cape.exceptions import EmptyDatasetError
from cape.geometry import perturb_rig
from cape.layers import CapeDetector, temporal_forward
from cape.models.box import Box3D, Detection
from cape.models.config import ExperimentConfig
from cape.models.metrics import MetricsRecord
from cape.models.scene import Frame, SceneSample
from cape.services.checkpoint import Checkpoint
from cape.services.dataset import SceneDataset

logger = logging.getLogger(__name__)

SPLITS = ("train", "eval")


def perturb_sample(sample: SceneSample, r_max_deg: float, rng: np.random.Generator) -> SceneSample:
    """Copy of ``sample`` whose rigs carry rotation noise; features and boxes are unchanged."""
    if r_max_deg == 0:
        return sample
    frames = [
        Frame(frame.boxes, perturb_rig(frame.rig, r_max_deg, rng), frame.features)
        for frame in (sample.current, sample.previous)
    ]
    return SceneSample(frames[0], frames[1], sample.ego_motion, sample.seed)


def predict(detector: CapeDetector, sample: SceneSample) -> list[Detection]:
    """Final-layer detections of one sample, every query included."""
    output = temporal_forward(detector, sample).final()
    if output is None:
        return []
    return decode_predictions(output, detector.normalizer)


def split_seeds(config: ExperimentConfig, split: str) -> list[int]:
    if split not in SPLITS:
        raise ValueError(f"Unknown split '{split}', expected one of {SPLITS}")
    seeds = config.dataset.train_seeds() if split == "train" else config.dataset.eval_seeds()
    return list(seeds)


class EvaluationService:
    """Score checkpoints on generated scenes."""

    def evaluate(
        self,
        checkpoint: Checkpoint,
        config: ExperimentConfig | None = None,
        split: str = "eval",
        seeds: Sequence[int] | None = None,
        r_max_deg: float = 0.0,
        noise_rng: np.random.Generator | None = None,
        detector: CapeDetector | None = None,
    ) -> MetricsRecord:
        """Evaluate ``checkpoint`` on the scenes of a split.

        Args:
            checkpoint: Trained state.
            config: Requested configuration; must hash like the checkpoint's.
                Defaults to the checkpoint's own.
            split: ``"train"`` or ``"eval"`` seed range of ``config.dataset``.
            seeds: Explicit scene seeds, overriding ``split``.
            r_max_deg: Extrinsic rotation noise applied to both frames at inference.
            noise_rng: Generator for that noise; required when ``r_max_deg > 0``.
            detector: A detector already built from ``checkpoint``.

        Raises:
            ConfigMismatchError: If ``config`` is incompatible with the checkpoint.
            EmptyDatasetError: If there is nothing to evaluate.
        """
        config = config or checkpoint.config
        checkpoint.require_compatible(config)
        scene_seeds = list(seeds) if seeds is not None else split_seeds(config, split)
        if not scene_seeds:
            raise EmptyDatasetError(f"No scenes in split '{split}'")
        if r_max_deg > 0 and noise_rng is None:
            raise ValueError("noise_rng is required when r_max_deg > 0")
        detector = detector or checkpoint.build_detector()

        predictions: list[list[Detection]] = []
        ground_truths: list[tuple[Box3D, ...]] = []
        for sample in SceneDataset(config.scene, scene_seeds, cache=False):
            if r_max_deg > 0:
                assert noise_rng is not None
                sample = perturb_sample(sample, r_max_deg, noise_rng)
            predictions.append(predict(detector, sample))
            ground_truths.append(sample.current.boxes)

        metrics = evaluate(predictions, ground_truths)
        logger.info(
            "Evaluated %d %s scenes: mAP %.4f", len(scene_seeds), split, metrics.mean_ap
        )
        return MetricsRecord(
            config_hash=checkpoint.config_hash,
            seed=config.seed,
            split=split if seeds is None else "custom",
            num_scenes=len(scene_seeds),
            metrics=metrics,
        )

    @staticmethod
    def write(record: MetricsRecord, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path
