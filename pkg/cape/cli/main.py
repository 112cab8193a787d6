"""Main CLI entry point for CAPE."""

import logging
import sys

import click
from rich.console import Console

from cape.cli.ablate import ablate
from cape.cli.dump_attn import dump_attn
from cape.cli.eval_cmd import eval_cmd
from cape.cli.gen_data import gen_data
from cape.cli.robustness import robustness
from cape.cli.train import train
from cape.exceptions import CapeError, DivergenceError

console = Console()


def _setup_logging(debug: bool = False) -> None:
    """Configure logging for a CLI run."""
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


@click.group()
@click.option("--debug/--no-debug", default=False, help="Show debug information")
@click.pass_context
def cli(ctx: click.Context, debug: bool) -> None:
    """CAPE - camera-view position embeddings for multi-view 3D detection.

    Trains and evaluates a desk-scale detector on synthetic multi-camera scenes
    and runs the ablation, robustness and attention-inspection experiments.
    """
    ctx.ensure_object(dict)
    ctx.obj["debug"] = debug
    _setup_logging(debug)


# Register commands
cli.add_command(train)
cli.add_command(eval_cmd, name="eval")
cli.add_command(ablate)
cli.add_command(robustness)
cli.add_command(dump_attn, name="dump-attn")
cli.add_command(gen_data, name="gen-data")


def main() -> None:
    """Main entry point with error handling."""
    try:
        cli()
    except DivergenceError as e:
        console.print(f"[yellow]Diverged:[/yellow] {e}")
        sys.exit(2)
    except CapeError as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)
    except Exception as e:
        if "--debug" in sys.argv:
            raise
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
