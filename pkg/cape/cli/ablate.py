"""Ablate command."""

from pathlib import Path

import click
from rich.table import Table

from cape.cli.common import (
    cli_errors,
    config_options,
    console,
    default_out,
    load_config,
    parse_ints,
)
from cape.services.ablation import ABLATION_TABLES, AblationService


def _fmt(value: float | None, digits: int = 4) -> str:
    return f"{value:.{digits}f}" if value is not None else "-"


@click.command()
@config_options
@click.option(
    "--table", "-t", "table_id", required=True,
    type=click.Choice([str(t) for t in sorted(ABLATION_TABLES)]),
    help="Which ablation table to run",
)
@click.option("--seeds", default="0,1,2", show_default=True, help="Comma-separated run seeds")
@click.option(
    "--workers", type=click.IntRange(min=1), help="Worker processes (capped by CAPE_THREADS)"
)
def ablate(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    table_id: str,
    seeds: str,
    workers: int | None,
) -> None:
    """Train and evaluate every row of an ablation table.

    Rows that diverge are recorded with status "diverged" instead of failing
    the run; the command then exits with code 2.

    Examples:
        cape ablate --config configs/desk.json --table 4
        cape ablate --table 6 --seeds 0,1,2,3 --workers 4
    """
    with cli_errors():
        base = load_config(config_path, seed)
        result = AblationService().run(base, int(table_id), parse_ints(seeds), workers)
        path = AblationService.write(
            result, default_out(out, base, "ablate") / f"table{table_id}.json"
        )

    table = Table(title=f"Ablation table {table_id}")
    table.add_column("Row")
    table.add_column("Setting")
    table.add_column("mAP (mean)", justify="right")
    table.add_column("mAP range", justify="right")
    table.add_column("mAVE", justify="right")
    table.add_column("Status")
    for row in result.rows:
        span = (
            f"{_fmt(row.mean_ap_min)}..{_fmt(row.mean_ap_max)}" if row.mean_ap is not None else "-"
        )
        status = "[yellow]diverged[/yellow]" if row.diverged else "[green]ok[/green]"
        table.add_row(
            row.row, row.description, _fmt(row.mean_ap), span, _fmt(row.mave, 3), status
        )
    console.print(table)
    console.print(f"[dim]Table: {path}[/dim]")
    if any(row.diverged for row in result.rows):
        raise SystemExit(2)
