"""Pytest fixtures for CAPE tests."""

from pathlib import Path

import numpy as np
import pytest

from cape.layers import CapeDetector
from cape.models.config import (
    DatasetConfig,
    ExperimentConfig,
    ModelConfig,
    OptimConfig,
    SceneConfig,
)
from cape.models.scene import SceneSample
from cape.scenegen import generate_scene
from cape.utils import make_rng
from cape.utils.seeds import STREAM_INIT

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def pytest_configure(config: pytest.Config) -> None:
    """Register the marker for long-running training-trend tests."""
    config.addinivalue_line(
        "markers",
        "slow: trains desk-scale models for minutes; excluded unless run with -m slow",
    )


def make_tiny_config(**sections: dict) -> ExperimentConfig:
    """Tiny experiment (C=8, M=4, N=2, L=1, D=4) used across the suite."""
    config = ExperimentConfig(
        name="tiny",
        seed=0,
        model=ModelConfig(
            channels=8, num_queries=4, num_layers=1, num_heads=2, num_classes=3, ffn_ratio=2
        ),
        optim=OptimConfig(steps=3, batch_size=1, log_every=1),
        scene=SceneConfig(
            num_cameras=2,
            height=4,
            width=8,
            channels=8,
            depth_bins=4,
            min_objects=1,
            max_objects=2,
        ),
        dataset=DatasetConfig(train_scenes=6, eval_scenes=2),
    )
    return config.with_updates(**sections) if sections else config


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """Tiny single-frame experiment configuration."""
    return make_tiny_config()


@pytest.fixture
def tiny_sample(tiny_config: ExperimentConfig) -> SceneSample:
    """A generated two-frame scene matching the tiny configuration."""
    return generate_scene(tiny_config.scene, 3)


@pytest.fixture
def tiny_detector(tiny_config: ExperimentConfig) -> CapeDetector:
    """Freshly initialized tiny detector."""
    return CapeDetector(tiny_config, make_rng(tiny_config.seed, STREAM_INIT))


@pytest.fixture
def rng() -> np.random.Generator:
    """Deterministic generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def smoke_config_path() -> Path:
    """Path to the shipped smoke configuration."""
    return REPO_ROOT / "configs" / "smoke.json"
