import functools
import sys

import click

from lmmgrid.config import config_hash, default_config, load_config
from lmmgrid.exceptions import LmmError, ValidationError
from lmmgrid.utils.io import format_cell


@click.group()
def main():
    """
    Top-level command entrypoint
    """
    pass


def fails_cleanly(command):
    """
    Turns engine errors into a red message and an exit code: 2 for bad
    input or config, 3 for numerical failures.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValidationError as e:
            click.echo(click.style(f"Invalid input: {e}", fg="red", bold=True), err=True)
            sys.exit(2)
        except LmmError as e:
            click.echo(click.style(f"Numerical failure: {e}", fg="red", bold=True), err=True)
            sys.exit(3)

    return wrapper


def load_run_config(config_path):
    """
    Loads a config file (the packaged base setup when none is given) and
    returns it with its provenance hash.
    """
    config = load_config(config_path) if config_path else default_config()
    click.echo(f"Config: {config_path or 'paper.json (packaged)'}", err=True)
    return config, config_hash(config)


def echo_table(header, rows):
    """
    Prints a small table to stderr.
    """
    click.echo(click.style("  ".join(f"{name:>12}" for name in header), bold=True), err=True)
    for row in rows:
        cells = [f"{value:12.6g}" if isinstance(value, float) else f"{format_cell(value):>12}" for value in row]
        click.echo("  ".join(cells), err=True)


# Import all sub-commands
import lmmgrid.commands.converge
import lmmgrid.commands.price
import lmmgrid.commands.smile
import lmmgrid.commands.validate


if __name__ == "__main__":
    main()
