import math
import os

import click

from lmmgrid.cli import echo_table, fails_cleanly, load_run_config, main
from lmmgrid.commands.price import (
    SMILE_HEADER,
    run_model,
    run_provenance,
    smile_rows,
    warn_missing_vols,
)
from lmmgrid.constants import MODELS, REFERENCE_SMILES, REFERENCE_TOLERANCE
from lmmgrid.pricing import compare_to_reference, smile_ordering
from lmmgrid.utils.graphics import smile_chart
from lmmgrid.utils.io import write_table

DEVIATION_HEADER = ("model", "strike_mult", "implied_vol", "reference", "deviation", "within")


@main.command()
@click.option(
    "-m",
    "--model",
    "models",
    type=click.Choice(MODELS),
    multiple=True,
    help="Models to run (default: all)",
)
@click.option("--paths", type=int, default=None, help="Monte Carlo path count")
@click.option("--seed", type=int, default=None, help="Master seed for Monte Carlo streams")
@click.option("-o", "--out", "output_dir", default=None, help="Output directory")
@click.option("--as-printed", is_flag=True, help="Use the curve exactly as printed")
@click.argument("config_path", required=False)
@fails_cleanly
def smile(config_path, models, paths, seed, output_dir, as_printed):
    """
    Runs several models on the same caplets, writes their smiles, plot data,
    an SVG chart and a deviation log against the printed reference tables.
    """
    config, digest = load_run_config(config_path)
    config = config.with_overrides(paths=paths, seed=seed, as_printed=as_printed)
    output_dir = output_dir or config.output.directory
    spec = config.caplet_spec()
    smiles = {}
    for model in models or MODELS:
        points = run_model(model, spec, config)
        smiles[model] = points
        echo_table(SMILE_HEADER, smile_rows(points))
        warn_missing_vols(points)
        provenance = run_provenance(config, digest, model, as_printed)
        write_table(
            os.path.join(output_dir, f"smile-{model}.csv"), SMILE_HEADER, smile_rows(points), provenance
        )
        write_table(
            os.path.join(output_dir, f"plot-{model}.csv"),
            ("strike_mult", "implied_vol_x100"),
            [(p.strike_mult, 100 * p.implied_vol) for p in points],
            provenance,
        )

    # Deviation log against the printed tables
    deviations = []
    for model, points in smiles.items():
        if model not in REFERENCE_SMILES or len(points) != len(REFERENCE_SMILES[model]):
            continue
        for row in compare_to_reference(points, REFERENCE_SMILES[model], REFERENCE_TOLERANCE[model]):
            deviations.append((model,) + tuple(row))
    provenance = run_provenance(config, digest, "all", as_printed)
    if deviations:
        write_table(
            os.path.join(output_dir, "deviations.csv"), DEVIATION_HEADER, deviations, provenance
        )
        outside = [row for row in deviations if not row[-1]]
        colour = "yellow" if outside else "green"
        click.echo(
            click.style(
                f"{len(outside)} of {len(deviations)} points outside the reference tolerance",
                fg=colour,
            ),
            err=True,
        )

    for check in smile_ordering(smiles):
        status = "ok" if check.passed else "FAILED"
        click.echo(
            click.style(
                f"Ordering: {check.name} ({check.strikes} strikes): {status}",
                fg="green" if check.passed else "yellow",
            ),
            err=True,
        )

    series = {
        model: [(p.strike_mult, 100 * p.implied_vol) for p in points]
        for model, points in smiles.items()
        if any(not math.isnan(p.implied_vol) for p in points)
    }
    if series:
        smile_chart(os.path.join(output_dir, "smile.svg"), series)
    click.echo(f"Wrote results to {output_dir}", err=True)
