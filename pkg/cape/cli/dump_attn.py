"""Attention dump command."""

from pathlib import Path

import click

from cape.cli.common import cli_errors, config_options, console, parse_ints
from cape.scenegen import generate_scene, load_scene
from cape.services.attention_dump import AttentionDumpService
from cape.services.checkpoint import CheckpointService
from cape.services.config import ConfigService


@click.command("dump-attn")
@config_options
@click.option(
    "--checkpoint", "-k", "checkpoint_dir", required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
)
@click.option(
    "--scene", "scene_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Scene file; defaults to the scene generated from the first eval seed",
)
@click.option("--queries", "-q", default="0", show_default=True, help="Comma-separated query ids")
def dump_attn(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    checkpoint_dir: Path,
    scene_path: Path | None,
    queries: str,
) -> None:
    """Write local, global, overall and softmax attention maps as CSV.

    With --seed and no --scene the scene generated from that seed is used.

    Examples:
        cape dump-attn -k runs/desk/checkpoint -q 0,3 --out dumps/desk
        cape dump-attn -k runs/desk/checkpoint --scene data/scene_00000007.json
    """
    with cli_errors():
        checkpoint = CheckpointService().load(checkpoint_dir)
        config = checkpoint.config
        if config_path is not None:
            config = ConfigService().load(config_path)
            checkpoint.require_compatible(config)
        if scene_path is not None:
            sample = load_scene(scene_path)
        else:
            scene_seed = seed if seed is not None else config.dataset.eval_seed_start
            sample = generate_scene(config.scene, scene_seed)
        out_dir = out if out is not None else Path("runs") / f"attention-{sample.seed}"
        manifest = AttentionDumpService().dump(checkpoint, sample, parse_ints(queries), out_dir)

    console.print(f"[green]Attention maps written:[/green] {manifest.parent}")
