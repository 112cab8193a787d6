"""CLI commands for CAPE."""

from cape.cli.main import cli

__all__ = ["cli"]
