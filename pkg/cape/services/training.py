"""Training loop: generated scenes, set-prediction loss, Adam with cosine decay."""

import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import NoReturn

import numpy as np

from cape.autodiff import GradTape
from cape.detection import LossBreakdown, total_loss
from cape.exceptions import CheckpointError, DivergenceError, EmptyDatasetError, NonFiniteError
from cape.layers import CapeDetector, ForwardResult, temporal_forward
from cape.models.config import ExperimentConfig, TemporalMode
from cape.models.metrics import StepRecord
from cape.models.scene import SceneSample
from cape.services.checkpoint import Checkpoint, CheckpointService
from cape.services.dataset import SceneDataset
from cape.services.optim import AdamOptimizer, clip_grad_norm, cosine_lr
from cape.utils import make_rng, restore_rng, rng_state
from cape.utils.seeds import STREAM_DATA_ORDER, STREAM_INIT

logger = logging.getLogger(__name__)

METRICS_FILENAME = "metrics.jsonl"
DIVERGENCE_FILENAME = "divergence.json"
CHECKPOINT_DIRNAME = "checkpoint"

StepCallback = Callable[[StepRecord], None]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    records: list[StepRecord] = field(default_factory=list)
    run_dir: Path | None = None

    @property
    def final_loss(self) -> float | None:
        return self.records[-1].loss if self.records else None


def sample_loss(
    detector: CapeDetector, sample: SceneSample, result: ForwardResult
) -> LossBreakdown:
    """Loss of one forward pass; the previous stream is supervised when configured."""
    config = detector.config
    supervise_prev = (
        config.temporal.mode == TemporalMode.SEPARATE
        and config.temporal.prev_loss
        and result.previous is not None
    )
    return total_loss(
        result.current,
        sample.current.boxes,
        detector.normalizer,
        config.loss,
        outputs_previous=result.previous if supervise_prev else None,
        gts_previous=sample.previous.boxes if supervise_prev else None,
    )


class TrainingService:
    """Train a detector from an experiment configuration."""

    def __init__(self, checkpoints: CheckpointService | None = None) -> None:
        self.checkpoints = checkpoints or CheckpointService()

    def train(
        self,
        config: ExperimentConfig,
        out_dir: Path | None = None,
        on_step: StepCallback | None = None,
        resume: Checkpoint | None = None,
    ) -> TrainResult:
        """Run ``config.optim.steps`` gradient steps.

        A run resumed from a checkpoint written at step ``k`` continues with step
        ``k`` and ends with the same parameters as an uninterrupted run.

        Args:
            config: The experiment.
            out_dir: Run directory for ``metrics.jsonl`` and checkpoints; nothing
                is written when ``None``.
            on_step: Called with every step's record.
            resume: Checkpoint to continue from; its config must hash like ``config``.

        Raises:
            EmptyDatasetError: If there are no training scenes.
            CheckpointError: If ``resume`` lacks optimizer state or is past the last step.
            ConfigMismatchError: If ``resume`` was trained with another model or scene.
            DivergenceError: If a loss or gradient becomes non-finite.
        """
        seeds = np.array(list(config.dataset.train_seeds()), dtype=np.int64)
        if seeds.size == 0:
            raise EmptyDatasetError("No training scenes configured")
        dataset = SceneDataset(config.scene, seeds.tolist(), cache=False)
        detector = CapeDetector(config, make_rng(config.seed, STREAM_INIT))
        order = make_rng(config.seed, STREAM_DATA_ORDER)
        names = [name for name, _ in detector.named_parameters()]
        optimizer = AdamOptimizer(detector.parameters(), config.optim)
        optim = config.optim
        start = 0
        if resume is not None:
            start, order = self._restore(resume, config, detector, optimizer, names)

        metrics_file = None
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            mode = "a" if start else "w"
            metrics_file = (out_dir / METRICS_FILENAME).open(mode, encoding="utf-8")

        logger.info(
            "Training %s: steps %d-%d, batch %d, %d parameters",
            config.name, start, optim.steps, optim.batch_size,
            sum(p.size for p in detector.parameters()),
        )
        records: list[StepRecord] = []
        try:
            for step in range(start, optim.steps):
                batch = seeds[order.integers(seeds.size, size=optim.batch_size)]
                terms = self._accumulate(detector, dataset, batch.tolist(), step, out_dir)
                grad_norm = clip_grad_norm(detector.parameters(), optim.grad_clip)
                if not math.isfinite(grad_norm):
                    self._diverge(detector, step, terms, out_dir)
                lr = cosine_lr(step, optim)
                optimizer.step(lr)
                optimizer.zero_grad()

                record = StepRecord(
                    step=step, lr=lr, loss=terms["total"], terms=terms, grad_norm=grad_norm
                )
                records.append(record)
                if metrics_file is not None:
                    metrics_file.write(record.model_dump_json() + "\n")
                if on_step is not None:
                    on_step(record)
                if step % optim.log_every == 0:
                    logger.info("step %d loss %.5f lr %.2e", step, record.loss, lr)
                else:
                    logger.debug("step %d loss %.5f", step, record.loss)
                if (
                    out_dir is not None
                    and optim.checkpoint_every
                    and (step + 1) % optim.checkpoint_every == 0
                ):
                    self.checkpoints.save(
                        Checkpoint.from_detector(
                            detector, step + 1, rng_state(order), optimizer.state_dict(names)
                        ),
                        out_dir / f"{CHECKPOINT_DIRNAME}_{step + 1:06d}",
                    )
        finally:
            if metrics_file is not None:
                metrics_file.close()

        checkpoint = Checkpoint.from_detector(
            detector, optim.steps, rng_state(order), optimizer.state_dict(names)
        )
        if out_dir is not None:
            self.checkpoints.save(checkpoint, out_dir / CHECKPOINT_DIRNAME)
        logger.info("Training finished after %d steps", optim.steps)
        return TrainResult(checkpoint=checkpoint, records=records, run_dir=out_dir)

    def _restore(
        self,
        resume: Checkpoint,
        config: ExperimentConfig,
        detector: CapeDetector,
        optimizer: AdamOptimizer,
        names: list[str],
    ) -> tuple[int, np.random.Generator]:
        """Load parameters and optimizer state; returns the next step and data-order rng."""
        resume.require_compatible(config)
        if resume.optimizer is None or resume.rng_state is None:
            raise CheckpointError("Checkpoint carries no optimizer state to resume from")
        if resume.step > config.optim.steps:
            raise CheckpointError(
                f"Checkpoint is at step {resume.step}, past the {config.optim.steps} configured"
            )
        detector.load_state_dict(resume.params)
        try:
            optimizer.load_state_dict(names, resume.optimizer)
        except ValueError as e:
            raise CheckpointError(str(e)) from e
        logger.info("Resuming %s from step %d", config.name, resume.step)
        return resume.step, restore_rng(resume.rng_state)

    def _accumulate(
        self,
        detector: CapeDetector,
        dataset: SceneDataset,
        batch: list[int],
        step: int,
        out_dir: Path | None,
    ) -> dict[str, float]:
        """Forward and backward every scene of a batch; gradients are averaged."""
        sums: dict[str, float] = {}
        for seed in batch:
            sample = dataset.get(seed)
            try:
                with GradTape() as tape:
                    breakdown = sample_loss(detector, sample, temporal_forward(detector, sample))
                    if not math.isfinite(breakdown.terms["total"]):
                        self._diverge(detector, step, breakdown.terms, out_dir)
                    tape.backward(breakdown.total / float(len(batch)))
            except NonFiniteError as e:
                self._diverge(detector, step, {"error": math.nan}, out_dir, cause=e)
            for key, value in breakdown.terms.items():
                sums[key] = sums.get(key, 0.0) + value / len(batch)
        return sums

    def _diverge(
        self,
        detector: CapeDetector,
        step: int,
        terms: dict[str, float],
        out_dir: Path | None,
        cause: Exception | None = None,
    ) -> NoReturn:
        dump_path = None
        if out_dir is not None:
            bad = [
                name for name, p in detector.named_parameters() if not np.all(np.isfinite(p.data))
            ]
            dump = {
                "step": step,
                "terms": {k: repr(v) for k, v in terms.items()},
                "non_finite_parameters": bad,
                "cause": str(cause) if cause else None,
                "config": detector.config.model_dump(mode="json"),
            }
            dump_path = str(Path(out_dir) / DIVERGENCE_FILENAME)
            Path(dump_path).write_text(json.dumps(dump, indent=2), encoding="utf-8")
        logger.warning("Training diverged at step %d", step)
        raise DivergenceError(step, terms, dump_path) from cause
