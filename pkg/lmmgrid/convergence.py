"""
Refinement experiments: shrink the grid step, scale the driver's increments
to the step length, and watch caplet prices and fixing-time rate laws
approach their lognormal limits.
"""

import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Tuple

import numpy
from scipy import stats

from lmmgrid.constants import DEFAULT_BATCH_SIZE, DEFAULT_PATH_LIMIT
from lmmgrid.drift import CompensatorContext, drift_atomic
from lmmgrid.driver import GaussianDriver
from lmmgrid.exceptions import SizeError, ValidationError
from lmmgrid.market import LimitVolatility, VolSurface, terminal_rn_weight
from lmmgrid.models import enumerate_tree, simulate_gz, simulate_paths
from lmmgrid.pricing import black_caplet, caplet_price, fixing_state
from lmmgrid.utils.stats import median

MODES = ("exact", "lattice", "mc")
CONVERGENCE_MODELS = ("discrete", "gz")

ConvergenceRow = namedtuple(
    "ConvergenceRow", ["p", "model", "price", "benchmark", "rel_error", "ks_stat", "seed"]
)

ConvergenceSummary = namedtuple(
    "ConvergenceSummary", ["model", "levels", "median_errors", "non_increasing"]
)


@dataclass(frozen=True)
class LognormalLaw:
    """
    Law of F exp(sqrt(V) Z - V/2): mean `forward`, log-variance `total_variance`.
    """

    forward: float
    total_variance: float

    def __post_init__(self):
        if not self.forward > 0 or not self.total_variance > 0:
            raise ValidationError("A lognormal law needs a positive forward and variance")

    @property
    def distribution(self):
        return stats.lognorm(
            s=math.sqrt(self.total_variance),
            scale=self.forward * math.exp(-0.5 * self.total_variance),
        )

    def cdf(self, x):
        return self.distribution.cdf(x)

    def rvs(self, size, random_state=None):
        return self.distribution.rvs(size=size, random_state=random_state)


def ks_distance(sample, law, weights=None):
    """
    Kolmogorov-Smirnov distance between a sample and `law`. With weights the
    sample is a discrete distribution and the distance is exact.
    """
    sample = numpy.asarray(sample, dtype=float).ravel()
    if sample.size < 1:
        raise ValidationError("KS distance needs a non-empty sample")
    if weights is None:
        return float(stats.kstest(sample, law.cdf).statistic)
    weights = numpy.asarray(weights, dtype=float).ravel()
    if weights.shape != sample.shape or numpy.any(weights < 0) or not weights.sum() > 0:
        raise ValidationError("KS weights must be non-negative and match the sample")
    order = numpy.argsort(sample, kind="stable")
    values = sample[order]
    upper = numpy.cumsum(weights[order]) / weights.sum()
    lower = numpy.concatenate(([0.0], upper[:-1]))
    cdf = law.cdf(values)
    return float(max(numpy.max(upper - cdf), numpy.max(cdf - lower), 0.0))


@dataclass(frozen=True)
class ConvergenceSpec:
    """
    Refinement levels p, limit vol functions per rate, the unscaled driver
    family, and how the discrete model is evaluated at each level.
    """

    levels: Tuple[int, ...]
    limit_lambdas: Tuple[LimitVolatility, ...]
    driver: object
    mode: str = "lattice"
    paths: int = 100_000
    seeds: Tuple[int, ...] = (1,)
    models: Tuple[str, ...] = ("discrete",)
    path_limit: int = DEFAULT_PATH_LIMIT
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        if not self.levels or any(int(p) != p or p < 1 for p in self.levels):
            raise ValidationError("Refinement levels must be positive integers")
        if self.mode not in MODES:
            raise ValidationError(f"Unknown mode {self.mode!r}, expected one of {', '.join(MODES)}")
        for model in self.models:
            if model not in CONVERGENCE_MODELS:
                raise ValidationError(f"Unknown convergence model {model!r}")
        if self.paths < 1 or not self.seeds:
            raise ValidationError("Need at least one path and one seed")


def lattice_distribution(driver, curve, surface, rate):
    """
    Law of the terminal rate at its fixing as a recombining binomial lattice:
    (values, probabilities) indexed by the number of upper atoms drawn.
    """
    tenor = curve.tenor
    if rate != tenor.n:
        raise ValidationError("The lattice only covers the terminal rate")
    if driver.kind != "atomic" or len(driver.values) != 2:
        raise ValidationError("The lattice needs a two-atom driver")
    horizon = tenor.fixing_step(rate)
    lambdas = surface.column(rate)[:horizon]
    if numpy.ptp(lambdas) != 0:
        raise ValidationError(f"The lattice needs a time-constant volatility for rate {rate}")
    lam = float(lambdas[0])
    ctx = CompensatorContext(0, rate, numpy.empty(0), numpy.array([lam]), numpy.empty(0))
    b = drift_atomic(driver, ctx)
    (up, q), (down, _) = zip(driver.values, driver.probabilities)
    ups = numpy.arange(horizon + 1)
    total = ups * up + (horizon - ups) * down + horizon * b
    values = curve.libor(rate) * numpy.exp(lam * total)
    return values, stats.binom.pmf(ups, horizon, q)


def _benchmark(curve, rate, strike, law, expiry):
    sigma = math.sqrt(law.total_variance / expiry)
    return black_caplet(
        law.forward, strike * law.forward, sigma, expiry, curve.bond(rate + 1), curve.delta
    )


def _ensemble_stats(ensemble, caplet, curve, law, terminal):
    state = fixing_state(ensemble, caplet)
    price, _ = caplet_price(ensemble, caplet, curve, caplet.strikes[0], state)
    sample = state.rates[:, caplet.fixing - 1]
    if terminal and not ensemble.exact:
        return price, ks_distance(sample, law)
    weights = ensemble.weights * terminal_rn_weight(state, caplet.fixing + 1)
    return price, ks_distance(sample, law, weights)


def _rel_error(price, benchmark):
    return abs(price - benchmark) / benchmark


def refine_experiment(spec, caplet, curve, progress=None):
    """
    One row per refinement level, model and seed. The terminal rate is
    benchmarked against Black with the limit total variance; lower rates
    compare the discrete model with the deflated-bond scheme at the same
    level, which is itself benchmarked against Black.
    """
    if len(caplet.strikes) != 1:
        raise ValidationError("A refinement experiment prices exactly one strike")
    rate = caplet.fixing
    strike = caplet.strikes[0]
    caplet.validate(curve.tenor)
    if numpy.any(numpy.diff(curve.initial_libors) <= 0):
        raise ValidationError("The refinement experiment needs a strictly increasing curve")
    terminal = rate == curve.n
    if spec.mode == "lattice" and not terminal:
        raise ValidationError("Lattice mode only covers the terminal rate")
    if spec.mode in ("exact", "lattice") and spec.driver.kind != "atomic":
        raise ValidationError(f"{spec.mode} mode needs an atomic driver")
    if spec.mode == "exact":
        atoms = len(spec.driver.values)
        for p in spec.levels:
            if atoms ** (p * rate) > spec.path_limit:
                raise SizeError(
                    f"Level p={p} needs {atoms}^{p * rate} paths, over the limit of {spec.path_limit}"
                )
    with_gz = "gz" in spec.models or not terminal

    rows = []
    for p in spec.levels:
        tenor = curve.tenor.refine(p)
        level_curve = curve.with_tenor(tenor)
        surface = VolSurface.from_limits(tenor, spec.limit_lambdas)
        driver = spec.driver.scaled(tenor.dt)
        horizon = tenor.fixing_step(rate)
        expiry = float(tenor.tenor_dates[rate - 1])
        law = LognormalLaw(
            level_curve.libor(rate), spec.limit_lambdas[rate - 1].total_variance(0.0, expiry)
        )
        black = _benchmark(level_curve, rate, strike, law, expiry)

        gz_prices = {}
        if with_gz:
            gaussian = GaussianDriver(1.0).scaled(tenor.dt)
            for seed in spec.seeds:
                ensemble = simulate_gz(
                    gaussian,
                    level_curve,
                    surface,
                    horizon,
                    spec.paths,
                    seed,
                    rates_from=rate,
                    keep_trajectory=False,
                    batch_size=spec.batch_size,
                )
                price, ks = _ensemble_stats(ensemble, caplet, level_curve, law, terminal)
                gz_prices[seed] = price
                if "gz" in spec.models:
                    rows.append(ConvergenceRow(p, "gz", price, black, _rel_error(price, black), ks, seed))

        if "discrete" in spec.models:
            if spec.mode == "lattice":
                values, weights = lattice_distribution(driver, level_curve, surface, rate)
                payoff = numpy.maximum(values - strike * law.forward, 0.0)
                price = level_curve.bond(rate + 1) * level_curve.delta * math.fsum(weights * payoff)
                ks = ks_distance(values, law, weights)
                rows.append(
                    ConvergenceRow(p, "discrete", price, black, _rel_error(price, black), ks, None)
                )
            elif spec.mode == "exact":
                ensemble = enumerate_tree(
                    driver, level_curve, surface, horizon, spec.path_limit, rates_from=rate
                )
                price, ks = _ensemble_stats(ensemble, caplet, level_curve, law, terminal)
                benchmark = black if terminal else median(list(gz_prices.values()))
                rows.append(
                    ConvergenceRow(
                        p, "discrete", price, benchmark, _rel_error(price, benchmark), ks, None
                    )
                )
            else:
                for seed in spec.seeds:
                    ensemble = simulate_paths(
                        driver,
                        level_curve,
                        surface,
                        horizon,
                        spec.paths,
                        seed,
                        rates_from=rate,
                        keep_trajectory=False,
                        batch_size=spec.batch_size,
                    )
                    price, ks = _ensemble_stats(ensemble, caplet, level_curve, law, terminal)
                    benchmark = black if terminal else gz_prices[seed]
                    rows.append(
                        ConvergenceRow(
                            p, "discrete", price, benchmark, _rel_error(price, benchmark), ks, seed
                        )
                    )
        if progress is not None:
            progress(1)
    return rows


def summarize(rows, tolerance=0.0):
    """
    Median relative error over seeds per model and level, and whether the
    medians never increase (beyond `tolerance`) as the grid is refined.
    """
    summaries = []
    for model in sorted({row.model for row in rows}):
        levels = sorted({row.p for row in rows if row.model == model})
        medians = [
            median([row.rel_error for row in rows if row.model == model and row.p == p])
            for p in levels
        ]
        non_increasing = all(later <= earlier + tolerance for earlier, later in zip(medians, medians[1:]))
        summaries.append(ConvergenceSummary(model, tuple(levels), tuple(medians), non_increasing))
    return summaries
