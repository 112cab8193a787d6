"""Train command."""

from pathlib import Path

import click
from rich.table import Table

from cape.cli.common import cli_errors, config_options, console, default_out, load_config
from cape.services.checkpoint import CheckpointService
from cape.services.config import ConfigService
from cape.services.training import CHECKPOINT_DIRNAME, METRICS_FILENAME, TrainingService


@click.command()
@config_options
@click.option("--steps", type=click.IntRange(min=0), help="Override optim.steps")
@click.option(
    "--resume", "resume_dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Continue from a checkpoint directory written by an earlier run",
)
def train(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    steps: int | None,
    resume_dir: Path | None,
) -> None:
    """Train a detector on generated scenes.

    Writes metrics.jsonl, the resolved config and a checkpoint directory.
    With --resume and no --config the checkpoint's own config is used.

    Examples:
        cape train --config configs/smoke.json --out runs/smoke
        cape train --config configs/desk.json --seed 1
        cape train --resume runs/desk/checkpoint_000500 --out runs/desk
    """
    with cli_errors():
        resume = CheckpointService().load(resume_dir) if resume_dir is not None else None
        if resume is not None and config_path is None:
            config = resume.config if seed is None else resume.config.with_updates(seed=seed)
        else:
            config = load_config(config_path, seed)
        if steps is not None:
            config = config.with_updates(optim={"steps": steps})
        run_dir = default_out(out, config, "train")
        ConfigService().save(config, run_dir / "config.json")
        result = TrainingService().train(config, run_dir, resume=resume)

    table = Table(title=f"Training: {config.name}")
    table.add_column("Steps", justify="right")
    table.add_column("First loss", justify="right")
    table.add_column("Final loss", justify="right")
    first = f"{result.records[0].loss:.4f}" if result.records else "-"
    final = f"{result.final_loss:.4f}" if result.final_loss is not None else "-"
    table.add_row(str(len(result.records)), first, final)
    console.print(table)
    console.print(f"[green]Checkpoint:[/green] {run_dir / CHECKPOINT_DIRNAME}")
    console.print(f"[dim]Metrics: {run_dir / METRICS_FILENAME}[/dim]")
