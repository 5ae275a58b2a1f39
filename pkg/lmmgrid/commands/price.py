import math
import os

import click

from lmmgrid.cli import echo_table, fails_cleanly, load_run_config, main
from lmmgrid.config import config_hash
from lmmgrid.constants import MODELS
from lmmgrid.pricing import build_smile
from lmmgrid.utils.io import write_table

SMILE_HEADER = ("strike_mult", "price", "implied_vol", "std_err", "vol_std_err")


def smile_rows(points):
    return [(p.strike_mult, p.price, p.implied_vol, p.std_err, p.vol_std_err) for p in points]


def run_model(model, spec, config):
    """
    Builds one smile, with a progress bar over the Monte Carlo paths.
    """
    click.echo(click.style(f"Pricing {model}", fg="blue", bold=True), err=True)
    if model.endswith("-exact"):
        return build_smile(model, spec, config)
    with click.progressbar(
        length=config.pricing.paths, label="Simulating paths", file=click.get_text_stream("stderr")
    ) as bar:
        return build_smile(model, spec, config, progress=bar.update)


def warn_missing_vols(points):
    for point in points:
        if math.isnan(point.implied_vol):
            click.echo(
                click.style(
                    f"No implied vol at K={point.strike_mult}: price {point.price:.6g} "
                    "does not exceed intrinsic value",
                    fg="yellow",
                ),
                err=True,
            )


def run_provenance(config, digest, model, as_printed):
    """
    Header fields of a smile CSV. `config_hash` identifies the config file,
    `run_hash` the config after command-line overrides.
    """
    exact = model.endswith("-exact")
    return {
        "config_hash": digest,
        "run_hash": config_hash(config),
        "seed": "none" if exact else config.pricing.seed,
        "paths": "none" if exact else config.pricing.paths,
        "curve": "as-printed" if as_printed else "corrected",
        "model": model,
    }


@main.command()
@click.option("-m", "--model", type=click.Choice(MODELS), default="bernoulli-exact")
@click.option("--paths", type=int, default=None, help="Monte Carlo path count")
@click.option("--seed", type=int, default=None, help="Master seed for Monte Carlo streams")
@click.option("-o", "--out", "output_path", default=None, help="CSV path, - for stdout")
@click.option("--as-printed", is_flag=True, help="Use the curve exactly as printed")
@click.argument("config_path", required=False)
@fails_cleanly
def price(config_path, model, paths, seed, output_path, as_printed):
    """
    Prices the caplet smile of one model and writes it as CSV.
    """
    config, digest = load_run_config(config_path)
    config = config.with_overrides(paths=paths, seed=seed, as_printed=as_printed)
    points = run_model(model, config.caplet_spec(), config)
    rows = smile_rows(points)
    echo_table(SMILE_HEADER, rows)
    warn_missing_vols(points)
    if output_path is None:
        output_path = os.path.join(config.output.directory, f"smile-{model}.csv")
    provenance = run_provenance(config, digest, model, as_printed)
    write_table(output_path, SMILE_HEADER, rows, provenance)
    if output_path != "-":
        click.echo(f"Wrote {output_path}", err=True)
