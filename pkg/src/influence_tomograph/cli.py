"""Command-line front end: one subcommand per pipeline stage plus serve.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.
"""
from __future__ import annotations

import os
import sys

import click

from .config import ConfigError, load_config
from .pipeline import Pipeline
from .service.app import STORE_DIR_ENV, create_app

STAGE_COMMANDS = ("ingest", "graph", "clean", "embed", "entities", "discover", "all")


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="YAML configuration file.")(fn)
    fn = click.option("--preset", default=None,
                      help="Named parameter preset (french-election, philippine, russophobia).")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Dotted-path config override, e.g. discovery.min_correlation=0.5.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker count for parallelizable stages (default: all cores).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the run seed.")(fn)
    return fn


@click.group()
def cli() -> None:
    """Influence pathway discovery pipeline and query service."""


def _execute_stage(stage: str, config_path, preset, overrides, jobs, seed) -> None:
    try:
        config = load_config(config_path, preset=preset, overrides=list(overrides), seed=seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        pipeline = Pipeline(config, jobs=jobs or os.cpu_count() or 1)
        outcome = pipeline.run(stage)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except (RuntimeError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for result in outcome.results:
        marker = " (cached)" if result.cached else ""
        click.echo(f"{result.name}: {result.summary}{marker}")
    click.echo(f"run {outcome.manifest.run_id} committed to {config.store_dir}")


def _register_stage(stage: str) -> None:
    @cli.command(name=stage, help=f"Run the {stage} stage (and reuse cached upstream stages)."
                 if stage != "all" else "Run the whole pipeline.")
    @_common_options
    def _command(config_path, preset, overrides, jobs, seed, _stage=stage):
        _execute_stage(_stage, config_path, preset, overrides, jobs, seed)


for _stage in STAGE_COMMANDS:
    _register_stage(_stage)


@cli.command(name="serve", help="Serve stored runs over HTTP for the operator console.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--preset", default=None)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="Listen address as HOST:PORT.")
@click.option("--ui-dir", default=None, type=click.Path(),
              help="Directory with the built console bundle.")
def serve(config_path, preset, overrides, bind, ui_dir) -> None:
    import uvicorn

    store_dir = os.environ.get(STORE_DIR_ENV)
    if store_dir is None:
        try:
            config = load_config(config_path, preset=preset, overrides=list(overrides))
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        store_dir = config.store_dir
    try:
        host, _, port_text = bind.rpartition(":")
        port = int(port_text)
        if not host:
            raise ValueError
    except ValueError:
        click.echo(f"config error: --bind must be HOST:PORT, got {bind!r}", err=True)
        sys.exit(1)
    app = create_app(store_dir=store_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


def main() -> None:
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()
