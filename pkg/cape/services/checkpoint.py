"""Checkpoint persistence: ``params.npz`` plus a ``checkpoint.json`` manifest.

Checkpoints written during training also carry ``optimizer.npz`` (Adam moments)
and the data-order generator state, so training can resume from them.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from cape.exceptions import CheckpointError, ConfigMismatchError
from cape.layers import CapeDetector, CoordinateNormalizer
from cape.models.config import ExperimentConfig
from cape.services.config import ConfigService
from cape.utils import make_rng
from cape.utils.seeds import STREAM_INIT

logger = logging.getLogger(__name__)

PARAMS_FILENAME = "params.npz"
OPTIMIZER_FILENAME = "optimizer.npz"
MANIFEST_FILENAME = "checkpoint.json"
CHECKPOINT_VERSION = 1


class CheckpointManifest(BaseModel):
    """Everything but the parameter arrays."""

    version: int = Field(default=CHECKPOINT_VERSION)
    config: ExperimentConfig
    config_hash: str
    normalizer: dict[str, Any]
    step: int = Field(ge=0)
    rng_state: dict[str, Any] | None = None
    optimizer_state: bool = Field(default=False, description="optimizer.npz is present")
    parameters: list[str] = Field(default_factory=list)


@dataclass
class Checkpoint:
    """A trained (or freshly initialized) detector state."""

    config: ExperimentConfig
    params: dict[str, np.ndarray]
    normalizer: CoordinateNormalizer
    config_hash: str
    step: int = 0
    rng_state: dict[str, Any] | None = field(default=None)
    optimizer: dict[str, np.ndarray] | None = field(default=None)

    @classmethod
    def from_detector(
        cls,
        detector: CapeDetector,
        step: int,
        rng_state: dict[str, Any] | None = None,
        optimizer: dict[str, np.ndarray] | None = None,
    ) -> "Checkpoint":
        return cls(
            config=detector.config,
            params=detector.state_dict(),
            normalizer=detector.normalizer,
            config_hash=ConfigService.config_hash(detector.config),
            step=step,
            rng_state=rng_state,
            optimizer=optimizer,
        )

    def build_detector(self) -> CapeDetector:
        """Instantiate a detector and load these parameters into it."""
        detector = CapeDetector(self.config, make_rng(self.config.seed, STREAM_INIT))
        if detector.normalizer != self.normalizer:
            raise CheckpointError("Stored normalization constants do not match the config")
        detector.load_state_dict(self.params)
        return detector

    def require_compatible(self, config: ExperimentConfig) -> None:
        """Raise ``ConfigMismatchError`` unless ``config`` hashes like this checkpoint's."""
        expected = ConfigService.config_hash(config)
        if expected != self.config_hash:
            raise ConfigMismatchError(expected, self.config_hash)


class CheckpointService:
    """Save and load checkpoints in a directory."""

    def save(self, checkpoint: Checkpoint, directory: Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(directory / PARAMS_FILENAME, **checkpoint.params)
        if checkpoint.optimizer is not None:
            np.savez(directory / OPTIMIZER_FILENAME, **checkpoint.optimizer)
        manifest = CheckpointManifest(
            config=checkpoint.config,
            config_hash=checkpoint.config_hash,
            normalizer=checkpoint.normalizer.to_dict(),
            step=checkpoint.step,
            rng_state=checkpoint.rng_state,
            optimizer_state=checkpoint.optimizer is not None,
            parameters=sorted(checkpoint.params),
        )
        (directory / MANIFEST_FILENAME).write_text(
            manifest.model_dump_json(indent=2), encoding="utf-8"
        )
        logger.info("Checkpoint written: %s (step %d)", directory, checkpoint.step)
        return directory

    def load(self, directory: Path) -> Checkpoint:
        """Read a checkpoint directory.

        Raises:
            CheckpointError: If either file is missing or malformed.
        """
        directory = Path(directory)
        manifest_path = directory / MANIFEST_FILENAME
        try:
            manifest = CheckpointManifest.model_validate(
                json.loads(manifest_path.read_text(encoding="utf-8"))
            )
        except (OSError, json.JSONDecodeError, ValidationError) as e:
            raise CheckpointError(f"Cannot read {manifest_path}: {e}") from e
        if manifest.version != CHECKPOINT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {manifest.version}")
        try:
            with np.load(directory / PARAMS_FILENAME) as archive:
                params = {name: archive[name].astype(np.float64) for name in archive.files}
        except (OSError, ValueError) as e:
            raise CheckpointError(f"Cannot read parameters in {directory}: {e}") from e
        optimizer = None
        if manifest.optimizer_state:
            try:
                with np.load(directory / OPTIMIZER_FILENAME) as archive:
                    optimizer = {name: archive[name] for name in archive.files}
            except (OSError, ValueError) as e:
                raise CheckpointError(f"Cannot read optimizer state in {directory}: {e}") from e
        if sorted(params) != manifest.parameters:
            raise CheckpointError("Parameter archive does not match the manifest")
        if ConfigService.config_hash(manifest.config) != manifest.config_hash:
            raise CheckpointError("Stored config does not match the stored hash")
        return Checkpoint(
            config=manifest.config,
            params=params,
            normalizer=CoordinateNormalizer.from_dict(manifest.normalizer),
            config_hash=manifest.config_hash,
            step=manifest.step,
            rng_state=manifest.rng_state,
            optimizer=optimizer,
        )
