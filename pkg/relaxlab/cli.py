# Command line: `relaxlab run --config <path>` and `relaxlab list-experiments`.

import logging
import sys

import click
from dotenv import load_dotenv

from relaxlab.config import load_config
from relaxlab.errors import RelaxLabError
from relaxlab.experiments import run_experiment
from relaxlab.tools.catalogue import load_catalogue

logger = logging.getLogger("relaxlab")


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level.")
def cli(verbose: bool):
    """Finite-volume lab for relaxation splitting schemes."""
    load_dotenv()
    configure_logging(verbose)


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment config (JSON).")
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Output directory (overrides config and $RELAXLAB_OUT).")
@click.option("--parallel", default=1, show_default=True, type=click.IntRange(min=1), help="Worker threads for sweep members.")
@click.option("--quiet", "-q", is_flag=True, help="Hide progress bars.")
def run_command(config_path: str, out, parallel: int, quiet: bool):
    """Run the experiment described by a config file."""
    try:
        cfg = load_config(config_path)
    except RelaxLabError as exc:
        logger.error("%s: %s", config_path, exc)
        sys.exit(1)
    sys.exit(run_experiment(cfg, out=out, parallel=parallel, progress=not quiet))


@cli.command("list-experiments")
def list_experiments():
    """List the registered experiments."""
    for entry in load_catalogue():
        click.echo(f"{entry['name']:<22}{entry['description']}")
