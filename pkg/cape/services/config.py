"""Experiment configuration files.

Configs are JSON or YAML by suffix. The hash that ties a checkpoint to its
configuration covers only the sections that define the model and its data
geometry, so changing the optimizer or the seed ranges does not orphan a
checkpoint.
"""

import json
import logging
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from cape.exceptions import InvalidConfigError
from cape.models.config import ExperimentConfig
from cape.utils import content_hash

logger = logging.getLogger(__name__)

HASHED_SECTIONS = ("model", "temporal", "scene")
YAML_SUFFIXES = (".yaml", ".yml")


class ConfigService:
    """Load, save and fingerprint experiment configurations."""

    def load(self, path: Path) -> ExperimentConfig:
        """Read a configuration file.

        Raises:
            InvalidConfigError: If the file is unreadable, unparsable, or fails validation.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise InvalidConfigError(f"Cannot read config {path}: {e}") from e
        try:
            raw = (
                yaml.safe_load(text) if path.suffix.lower() in YAML_SUFFIXES else json.loads(text)
            )
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise InvalidConfigError(f"Cannot parse config {path}: {e}") from e
        return self.from_dict(raw or {}, source=str(path))

    def from_dict(self, data: dict[str, Any], source: str = "<dict>") -> ExperimentConfig:
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
                for err in e.errors()
            )
            raise InvalidConfigError(f"Invalid config {source}: {problems}") from e

    def resolve(self, path: Path | None, seed: int | None = None) -> ExperimentConfig:
        """Config from ``path`` (defaults when ``None``) with an optional seed override."""
        config = self.load(path) if path is not None else ExperimentConfig()
        if seed is not None:
            config = config.model_copy(update={"seed": seed})
        logger.debug("Resolved config %s (seed %d)", config.name, config.seed)
        return config

    def save(self, config: ExperimentConfig, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = config.model_dump(mode="json")
        if path.suffix.lower() in YAML_SUFFIXES:
            path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
        else:
            path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def config_hash(config: ExperimentConfig) -> str:
        """sha256 of the canonical JSON of the model-defining sections."""
        data = config.model_dump(mode="json")
        return content_hash({k: data[k] for k in HASHED_SECTIONS})
