"""Dataset generation command."""

from pathlib import Path

import click

from cape.cli.common import cli_errors, config_options, console, default_out, load_config
from cape.services.dataset import write_dataset
from cape.services.evaluation import SPLITS, split_seeds


@click.command("gen-data")
@config_options
@click.option("--split", type=click.Choice(SPLITS), default="eval", show_default=True)
@click.option("--count", type=click.IntRange(min=0), help="Limit the number of scenes")
@click.option(
    "--workers", type=click.IntRange(min=1), help="Worker processes (capped by CAPE_THREADS)"
)
def gen_data(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    split: str,
    count: int | None,
    workers: int | None,
) -> None:
    """Write a numbered set of generated scenes plus index.json.

    With --seed the scenes start at that seed instead of the split's range.

    Examples:
        cape gen-data --config configs/smoke.json --count 10 --out data/smoke
        cape gen-data --split train --workers 4
    """
    with cli_errors():
        config = load_config(config_path, None)
        seeds = split_seeds(config, split)
        if seed is not None:
            seeds = [seed + i for i in range(len(seeds))]
        if count is not None:
            seeds = seeds[:count]
        index = write_dataset(config.scene, seeds, default_out(out, config, "data"), workers)

    console.print(f"[green]Wrote {len(seeds)} scenes.[/green] Index: {index}")
