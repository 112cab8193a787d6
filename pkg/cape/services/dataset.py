"""Seed-addressed scene sets, generated on demand or written to disk."""

import json
import logging
from collections.abc import Iterator, Sequence
from functools import partial
from pathlib import Path

from cape.models.config import SceneConfig
from cape.models.scene import SceneSample
from cape.scenegen import generate_scene, save_scene
from cape.services.workers import run_parallel

logger = logging.getLogger(__name__)

INDEX_FILENAME = "index.json"


class SceneDataset:
    """Scenes identified by seed, generated lazily and cached in memory."""

    def __init__(self, config: SceneConfig, seeds: Sequence[int], cache: bool = True) -> None:
        self.config = config
        self.seeds = list(seeds)
        self._cache: dict[int, SceneSample] | None = {} if cache else None

    def __len__(self) -> int:
        return len(self.seeds)

    def __iter__(self) -> Iterator[SceneSample]:
        for seed in self.seeds:
            yield self.get(seed)

    def get(self, seed: int) -> SceneSample:
        if self._cache is None:
            return generate_scene(self.config, seed)
        if seed not in self._cache:
            self._cache[seed] = generate_scene(self.config, seed)
        return self._cache[seed]


def _write_one(job: tuple[int, Path], config: SceneConfig) -> str:
    seed, path = job
    save_scene(generate_scene(config, seed), path)
    return path.name


def write_dataset(
    config: SceneConfig, seeds: Sequence[int], out_dir: Path, workers: int | None = None
) -> Path:
    """Write ``scene_<seed>.json`` (+ blob) for every seed and an index file.

    Returns:
        Path of the index file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(seed, out_dir / f"scene_{seed:08d}.json") for seed in seeds]
    names = run_parallel(partial(_write_one, config=config), jobs, workers)
    index = {
        "scene_config": config.model_dump(mode="json"),
        "scenes": [
            {"seed": seed, "file": name} for (seed, _), name in zip(jobs, names, strict=True)
        ],
    }
    index_path = out_dir / INDEX_FILENAME
    index_path.write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote %d scenes to %s", len(jobs), out_dir)
    return index_path
