"""Ablation tables: flag combinations trained and evaluated over shared seeds.

Each table toggles one family of mechanisms on top of a base configuration:

* table 4: position-embedding frame and bilateral attention
* table 5: feature guidance of query and key embeddings
* table 6: how the previous frame takes part
* table 7: temporal fusion operator and ego-motion embedding
"""

import logging
from collections.abc import Sequence
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field

from cape.exceptions import DivergenceError
from cape.models.config import ExperimentConfig
from cape.services.evaluation import EvaluationService
from cape.services.training import TrainingService
from cape.services.workers import run_parallel

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2)


class AblationRow(BaseModel):
    """One setting of a table: section overrides applied to the base config."""

    table: int
    row: str
    description: str
    overrides: dict[str, dict[str, Any]]

    def apply(self, base: ExperimentConfig) -> ExperimentConfig:
        return base.with_updates(name=f"{base.name}-t{self.table}{self.row}", **self.overrides)


def _row(table: int, row: str, description: str, **overrides: dict[str, Any]) -> AblationRow:
    return AblationRow(table=table, row=row, description=description, overrides=overrides)


_SEPARATE = {"mode": "separate_queries", "prev_loss": True}

ABLATION_TABLES: dict[int, tuple[AblationRow, ...]] = {
    4: (
        _row(4, "a", "global PE, additive attention",
             model={"pe_mode": "global", "bilateral": False}),
        _row(4, "b", "global PE, bilateral attention",
             model={"pe_mode": "global", "bilateral": True}),
        _row(4, "c", "camera-view PE, additive attention",
             model={"pe_mode": "camera", "bilateral": False}),
        _row(4, "d", "camera-view PE, bilateral attention",
             model={"pe_mode": "camera", "bilateral": True}),
    ),
    5: (
        _row(5, "a", "no feature guidance", model={"query_fpe": False, "key_fpe": False}),
        _row(5, "b", "Q-FPE only", model={"query_fpe": True, "key_fpe": False}),
        _row(5, "c", "K-FPE only", model={"query_fpe": False, "key_fpe": True}),
        _row(5, "d", "Q-FPE and K-FPE", model={"query_fpe": True, "key_fpe": True}),
    ),
    6: (
        _row(6, "a", "queries shared across frames", temporal={"mode": "shared_queries"}),
        _row(6, "b", "separate queries, no previous-frame loss",
             temporal={"mode": "separate_queries", "prev_loss": False}),
        _row(6, "c", "separate queries with previous-frame loss", temporal=dict(_SEPARATE)),
    ),
    7: (
        _row(7, "a", "concat MLP fusion",
             temporal={**_SEPARATE, "fusion": "concat_mlp", "ego_embedding": False}),
        _row(7, "b", "concat MLP fusion with ego embedding",
             temporal={**_SEPARATE, "fusion": "concat_mlp", "ego_embedding": True}),
        _row(7, "c", "channel attention fusion",
             temporal={**_SEPARATE, "fusion": "channel_attention", "ego_embedding": False}),
        _row(7, "d", "channel attention fusion with ego embedding",
             temporal={**_SEPARATE, "fusion": "channel_attention", "ego_embedding": True}),
    ),
}


def ablation_rows(table: int) -> tuple[AblationRow, ...]:
    if table not in ABLATION_TABLES:
        raise ValueError(f"Unknown ablation table {table}; choose from {sorted(ABLATION_TABLES)}")
    return ABLATION_TABLES[table]


class SeedResult(BaseModel):
    seed: int
    status: str = Field(description="ok or diverged")
    mean_ap: float | None = None
    ap_2m: float | None = None
    mate: float | None = None
    mave: float | None = None
    final_loss: float | None = None
    diverged_step: int | None = None


class RowResult(BaseModel):
    row: str
    description: str
    overrides: dict[str, dict[str, Any]]
    status: str = Field(description="ok, or diverged when any seed diverged")
    seeds: list[SeedResult]
    mean_ap: float | None = None
    mean_ap_min: float | None = None
    mean_ap_max: float | None = None
    mave: float | None = None

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


class AblationTable(BaseModel):
    table: int
    base: str
    rows: list[RowResult] = Field(default_factory=list)

    def row(self, name: str) -> RowResult:
        for result in self.rows:
            if result.row == name:
                return result
        raise KeyError(name)


def run_row_seed(job: tuple[AblationRow, int], base: ExperimentConfig) -> SeedResult:
    """Train and evaluate one row with one seed; divergence becomes a status."""
    row, seed = job
    config = row.apply(base).model_copy(update={"seed": seed})
    try:
        trained = TrainingService().train(config)
    except DivergenceError as e:
        logger.warning("Table %d row %s seed %d diverged at step %d", row.table, row.row, seed,
                       e.step)
        return SeedResult(seed=seed, status="diverged", diverged_step=e.step)
    metrics = EvaluationService().evaluate(trained.checkpoint, config).metrics
    return SeedResult(
        seed=seed,
        status="ok",
        mean_ap=metrics.mean_ap,
        ap_2m=metrics.ap_at(2.0),
        mate=metrics.mate,
        mave=metrics.mave,
        final_loss=trained.final_loss,
    )


def summarize_row(row: AblationRow, seeds: list[SeedResult]) -> RowResult:
    """Mean and range over seeds that finished; a row with any divergence is marked."""
    finished = [s for s in seeds if s.status == "ok"]
    maps = [s.mean_ap for s in finished if s.mean_ap is not None]
    mave = [s.mave for s in finished if s.mave is not None]
    return RowResult(
        row=row.row,
        description=row.description,
        overrides=row.overrides,
        status="ok" if len(finished) == len(seeds) else "diverged",
        seeds=seeds,
        mean_ap=float(np.mean(maps)) if maps else None,
        mean_ap_min=float(np.min(maps)) if maps else None,
        mean_ap_max=float(np.max(maps)) if maps else None,
        mave=float(np.mean(mave)) if mave else None,
    )


class AblationService:
    """Run every row of a table over shared seeds, rows and seeds in parallel."""

    def run(
        self,
        base: ExperimentConfig,
        table: int,
        seeds: Sequence[int] = DEFAULT_SEEDS,
        workers: int | None = None,
    ) -> AblationTable:
        rows = ablation_rows(table)
        jobs = [(row, seed) for row in rows for seed in seeds]
        logger.info("Ablation table %d: %d rows x %d seeds", table, len(rows), len(seeds))
        results = run_parallel(partial(run_row_seed, base=base), jobs, workers)
        out = AblationTable(table=table, base=base.name)
        for i, row in enumerate(rows):
            out.rows.append(summarize_row(row, results[i * len(seeds) : (i + 1) * len(seeds)]))
        return out

    @staticmethod
    def write(result: AblationTable, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path
