import os

import click

from lmmgrid.cli import echo_table, fails_cleanly, load_run_config, main
from lmmgrid.config import config_hash
from lmmgrid.convergence import MODES, refine_experiment, summarize
from lmmgrid.exceptions import ValidationError
from lmmgrid.utils.io import write_table

CONVERGENCE_HEADER = ("p", "model", "price", "benchmark", "rel_error", "ks_stat", "seed")


def parse_levels(text):
    try:
        return [int(level) for level in text.split(",") if level.strip()]
    except ValueError:
        raise ValidationError(f"--levels must be comma-separated integers, got {text!r}")


@main.command()
@click.option("--levels", default=None, help="Comma-separated refinement levels, e.g. 1,2,4")
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--paths", type=int, default=None, help="Monte Carlo path count")
@click.option("--seed", type=int, default=None, help="Run a single seed")
@click.option("-o", "--out", "output_path", default=None, help="CSV path, - for stdout")
@click.argument("config_path", required=False)
@fails_cleanly
def converge(config_path, levels, mode, paths, seed, output_path):
    """
    Refines the time grid and compares caplet prices and rate laws with
    their lognormal limits.
    """
    config, digest = load_run_config(config_path)
    config = config.with_overrides(
        paths=paths,
        seed=seed,
        levels=parse_levels(levels) if levels is not None else None,
        mode=mode,
    )
    spec = config.convergence_spec()
    caplet = config.convergence_caplet()
    click.echo(
        click.style(
            f"Refining rate {caplet.fixing} in {spec.mode} mode over p = "
            + ", ".join(str(p) for p in spec.levels),
            fg="blue",
            bold=True,
        ),
        err=True,
    )
    with click.progressbar(
        length=len(spec.levels), label="Refinement levels", file=click.get_text_stream("stderr")
    ) as bar:
        rows = refine_experiment(spec, caplet, config.market_curve(), progress=bar.update)
    echo_table(CONVERGENCE_HEADER, rows)
    for summary in summarize(rows):
        colour = "green" if summary.non_increasing else "yellow"
        trend = "non-increasing" if summary.non_increasing else "NOT monotone"
        click.echo(
            click.style(f"{summary.model}: median error {trend} across levels", fg=colour),
            err=True,
        )
    if output_path is None:
        output_path = os.path.join(config.output.directory, "convergence.csv")
    provenance = {
        "config_hash": digest,
        "run_hash": config_hash(config),
        "paths": spec.paths if spec.mode != "lattice" else "none",
        "seed": ",".join(str(s) for s in spec.seeds) if spec.mode != "lattice" else "none",
        "mode": spec.mode,
    }
    write_table(output_path, CONVERGENCE_HEADER, rows, provenance)
    if output_path != "-":
        click.echo(f"Wrote {output_path}", err=True)
