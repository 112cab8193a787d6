"""Options and error handling shared by the CLI commands."""

from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, TypeVar

import click
from rich.console import Console

from cape.exceptions import CapeError, DivergenceError
from cape.models.config import ExperimentConfig
from cape.services.config import ConfigService

console = Console()

EXIT_ERROR = 1
EXIT_DIVERGED = 2

F = TypeVar("F", bound=Callable[..., Any])


def config_options(func: F) -> F:
    """Attach the ``--config``, ``--seed`` and ``--out`` options every verb accepts."""
    func = click.option(
        "--out", "-o", type=click.Path(file_okay=False, path_type=Path), help="Output directory"
    )(func)
    func = click.option(
        "--seed", type=click.IntRange(min=0), help="Override the experiment seed"
    )(func)
    func = click.option(
        "--config", "-c", "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Experiment config (JSON or YAML)",
    )(func)
    return func


def load_config(config_path: Path | None, seed: int | None) -> ExperimentConfig:
    return ConfigService().resolve(config_path, seed)


def default_out(out: Path | None, config: ExperimentConfig, verb: str) -> Path:
    return out if out is not None else Path("runs") / f"{config.name}-{verb}-s{config.seed}"


def parse_floats(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got '{value}'") from e


def parse_ints(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'") from e


@contextmanager
def cli_errors() -> Iterator[None]:
    """Map package errors to exit codes: 2 for divergence, 1 for anything else."""
    try:
        yield
    except DivergenceError as e:
        console.print(f"[yellow]Diverged:[/yellow] {e}")
        raise SystemExit(EXIT_DIVERGED) from e
    except CapeError as e:
        console.print(f"[red]Error:[/red] {e}")
        raise SystemExit(EXIT_ERROR) from e
