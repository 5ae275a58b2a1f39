import click
import numpy

from lmmgrid.cli import fails_cleanly, load_run_config, main
from lmmgrid.config import config_to_dict
from lmmgrid.drift import CompensatorContext, martingale_residual, step_drifts
from lmmgrid.exceptions import NumericalError
from lmmgrid.market import ell
from lmmgrid.models import tree_diagnostics
from lmmgrid.utils.io import write_json

TREE_TOLERANCE = 1e-12
GAUSSIAN_TOLERANCE = 1e-8


def gaussian_residual(driver, curve, surface):
    """
    Largest martingale residual of the first-step Gaussian drifts.
    """
    tenor = curve.tenor
    rates = numpy.asarray(curve.initial_libors)[None, :]
    row = surface.row(1)
    drifts = step_drifts(driver, row, rates, tenor.delta, tenor.active(1), 1)
    ells = ell(rates, tenor.delta)
    worst = 0.0
    for j in range(1, tenor.n + 1):
        ctx = CompensatorContext(1, j, ells[:, j:], row[j - 1 :], drifts[:, j:])
        worst = max(worst, float(numpy.max(numpy.abs(martingale_residual(driver, ctx, drifts[:, j - 1])))))
    return worst


def report(label, value, tolerance):
    ok = value <= tolerance
    click.echo(
        click.style(f"{label}: {value:.3g} (tolerance {tolerance:g})", fg="green" if ok else "red"),
        err=True,
    )
    return ok


@main.command()
@click.option("--normalized", "normalized_path", default=None, help="Write the parsed config back out")
@click.argument("config_path", required=False)
@fails_cleanly
def validate(config_path, normalized_path):
    """
    Checks a config and runs the exactness diagnostics of the base model.
    """
    config, digest = load_run_config(config_path)
    click.echo(f"Config hash: {digest}", err=True)
    tenor = config.tenor_structure()
    spec = config.caplet_spec().validate(tenor)
    curve = config.market_curve()
    surface = config.vol_surface(tenor)
    horizon = tenor.fixing_step(spec.fixing)
    passed = True
    if "atomic" in config.drivers:
        click.echo(click.style(f"Tree up to step {horizon}", fg="blue", bold=True), err=True)
        driver = config.driver("atomic").scaled(tenor.dt)
        diagnostics = tree_diagnostics(driver, curve, surface, horizon, config.pricing.path_limit)
        click.echo(f"Paths: {diagnostics.paths}", err=True)
        passed &= report("Probability mass error", diagnostics.probability_error, TREE_TOLERANCE)
        passed &= report("Martingale residual", diagnostics.max_residual, TREE_TOLERANCE)
        passed &= report("Subset expansion gap", diagnostics.max_expansion_gap, TREE_TOLERANCE)
        passed &= report("Bond ratio error", diagnostics.bond_error, TREE_TOLERANCE)
    if "gaussian" in config.drivers:
        click.echo(click.style("Gaussian drifts at the first step", fg="blue", bold=True), err=True)
        driver = config.driver("gaussian").scaled(tenor.dt)
        passed &= report(
            "Martingale residual", gaussian_residual(driver, curve, surface), GAUSSIAN_TOLERANCE
        )
    if normalized_path:
        write_json(config_to_dict(config), normalized_path)
    if not passed:
        raise NumericalError("Exactness diagnostics exceeded their tolerances")
    click.echo(click.style("Config OK", fg="green", bold=True), err=True)
