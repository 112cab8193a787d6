"""Eval command."""

from pathlib import Path

import click
from rich.table import Table

from cape.cli.common import cli_errors, config_options, console, default_out
from cape.services.checkpoint import CheckpointService
from cape.services.config import ConfigService
from cape.services.evaluation import SPLITS, EvaluationService


@click.command("eval")
@config_options
@click.option(
    "--checkpoint", "-k", "checkpoint_dir", required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Checkpoint directory",
)
@click.option("--split", type=click.Choice(SPLITS), default="eval", show_default=True)
def eval_cmd(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    checkpoint_dir: Path,
    split: str,
) -> None:
    """Evaluate a checkpoint and write metrics.json.

    Without --config the checkpoint's own configuration is used. A config whose
    model, temporal or scene sections differ from the checkpoint's is rejected.

    Examples:
        cape eval --checkpoint runs/smoke/checkpoint
        cape eval --checkpoint runs/desk/checkpoint --split train
    """
    with cli_errors():
        checkpoint = CheckpointService().load(checkpoint_dir)
        config = checkpoint.config
        if config_path is not None:
            config = ConfigService().resolve(config_path, seed)
        elif seed is not None:
            config = config.model_copy(update={"seed": seed})
        record = EvaluationService().evaluate(checkpoint, config, split=split)
        path = EvaluationService.write(record, default_out(out, config, "eval") / "metrics.json")

    metrics = record.metrics
    table = Table(title=f"Desk metrics ({record.split}, {record.num_scenes} scenes)")
    for key in metrics.ap:
        table.add_column(f"AP@{key}", justify="right")
    table.add_column("mAP", justify="right")
    table.add_column("mATE", justify="right")
    table.add_column("mAVE", justify="right")
    table.add_row(
        *(f"{v:.4f}" for v in metrics.ap.values()),
        f"{metrics.mean_ap:.4f}",
        f"{metrics.mate:.3f}" if metrics.mate is not None else "-",
        f"{metrics.mave:.3f}" if metrics.mave is not None else "-",
    )
    console.print(table)
    console.print(f"[dim]Metrics: {path}[/dim]")
