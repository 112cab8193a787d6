"""Robustness command."""

from pathlib import Path

import click
from rich.table import Table

from cape.cli.common import (
    cli_errors,
    config_options,
    console,
    load_config,
    parse_floats,
)
from cape.services.checkpoint import CheckpointService
from cape.services.robustness import DEFAULT_LEVELS, RobustnessService


def _parse_checkpoint(value: str) -> tuple[str, Path]:
    label, sep, path = value.partition("=")
    if not sep or not label or not path:
        raise click.BadParameter(f"expected LABEL=DIR, got '{value}'")
    return label, Path(path)


@click.command()
@config_options
@click.option(
    "--checkpoint", "-k", "checkpoints", multiple=True, required=True,
    help="LABEL=DIR of a checkpoint to sweep (repeatable)",
)
@click.option(
    "--levels", default=",".join(str(v) for v in DEFAULT_LEVELS), show_default=True,
    help="Comma-separated R_max values in degrees",
)
@click.option("--trials", type=click.IntRange(min=1), default=20, show_default=True)
def robustness(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    checkpoints: tuple[str, ...],
    levels: str,
    trials: int,
) -> None:
    """Measure mAP drops under inference-time extrinsic rotation noise.

    Scenes come from the eval seed range of --config (defaults otherwise); --seed
    selects the noise stream.

    Examples:
        cape robustness -k camera=runs/cam/checkpoint -k global=runs/glob/checkpoint
        cape robustness -k camera=runs/cam/checkpoint --levels 0,4 --trials 5
    """
    with cli_errors():
        config = load_config(config_path, seed)
        service = CheckpointService()
        loaded = []
        for value in checkpoints:
            label, path = _parse_checkpoint(value)
            loaded.append((label, service.load(path)))
        report = RobustnessService().sweep(
            loaded,
            levels=parse_floats(levels),
            trials=trials,
            seeds=list(config.dataset.eval_seeds()),
            noise_seed=config.seed,
        )
        out_dir = out if out is not None else Path("runs") / f"robustness-s{config.seed}"
        path = RobustnessService.write(report, out_dir / "robustness.json")

    table = Table(title=f"mAP drop under extrinsic noise ({trials} trials)")
    table.add_column("Model")
    table.add_column("Clean mAP", justify="right")
    for level in report.curves[0].levels if report.curves else []:
        table.add_column(f"R_max {level.r_max_deg:g}", justify="right")
    for curve in report.curves:
        table.add_row(
            curve.label,
            f"{curve.clean_map:.4f}",
            *(f"{level.mean_drop:+.4f}" for level in curve.levels),
        )
    console.print(table)
    console.print(f"[dim]Report: {path}[/dim]")
