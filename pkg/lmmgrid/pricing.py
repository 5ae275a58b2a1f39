"""
Caplets on L(T_j, T_j) paid at T_{j+1}, priced under the forward measure
P_{j+1} by reweighting terminal-measure paths, and the Black-76 formula used
to quote the results as implied volatilities.
"""

import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Tuple

import numpy
from scipy import optimize
from scipy.stats import norm

from lmmgrid.constants import IMPLIED_VOL_BRACKET, MODELS
from lmmgrid.exceptions import (
    DomainError,
    HorizonError,
    NoSolutionError,
    RateIndexError,
    ValidationError,
)
from lmmgrid.market import terminal_rn_weight
from lmmgrid.models import enumerate_tree, simulate_gz, simulate_paths
from lmmgrid.utils.stats import standard_error, weighted_mean

CapletPrice = namedtuple("CapletPrice", ["price", "std_err"])

Deviation = namedtuple(
    "Deviation", ["strike_mult", "implied_vol", "reference", "deviation", "within"]
)

OrderingCheck = namedtuple("OrderingCheck", ["name", "passed", "strikes"])


@dataclass(frozen=True)
class CapletSpec:
    """
    Caplets fixing at T_`fixing` and paying at T_`fixing`+1, one per strike
    multiplier (strike = multiplier * L(0, T_fixing)).
    """

    fixing: int
    strikes: Tuple[float, ...]

    @property
    def payment(self):
        return self.fixing + 1

    def validate(self, tenor):
        if not 1 <= self.fixing <= tenor.n:
            raise ValidationError(f"Caplet fixing index {self.fixing} is outside 1..{tenor.n}")
        if not self.strikes:
            raise ValidationError("Need at least one strike")
        for strike in self.strikes:
            if not strike > 0:
                raise ValidationError(f"Strike multipliers must be positive, got {strike}")
        return self


@dataclass(frozen=True)
class SmilePoint:
    strike_mult: float
    price: float
    implied_vol: float
    std_err: float = 0.0
    vol_std_err: float = 0.0


def fixing_state(ensemble, spec):
    """
    The ensemble's state at T_j, where the caplet's rate fixes.
    """
    step = ensemble.tenor.fixing_step(spec.fixing)
    if ensemble.horizon < step:
        raise HorizonError(
            f"Ensemble stops at step {ensemble.horizon}, rate {spec.fixing} fixes at step {step}"
        )
    state = ensemble.state_at(step)
    if spec.fixing < state.rates_from:
        raise RateIndexError(
            f"Rate {spec.fixing} is not simulated (rates start at {state.rates_from})"
        )
    return state


def caplet_price(ensemble, spec, curve, strike_mult, state=None):
    """
    B(0, T_{j+1}) delta E_{n+1}[(L(T_j, T_j) - K L(0, T_j))^+ dP_{j+1}/dP_{n+1}].
    The standard error is zero for exact trees. A zero multiplier is allowed.
    """
    if strike_mult < 0:
        raise ValidationError(f"Strike multiplier must not be negative, got {strike_mult}")
    if state is None:
        state = fixing_state(ensemble, spec)
    j = spec.fixing
    fixed = state.rates[..., j - 1]
    payoff = numpy.maximum(fixed - strike_mult * curve.libor(j), 0.0)
    weighted = payoff * terminal_rn_weight(state, j + 1)
    scale = curve.bond(j + 1) * curve.delta
    price = scale * weighted_mean(weighted, ensemble.weights)
    if ensemble.exact:
        return CapletPrice(price, 0.0)
    return CapletPrice(price, scale * standard_error(weighted))


def black_caplet(forward, strike, sigma, expiry, discount, delta):
    """
    Black-76 caplet: discount * delta * (F N(d1) - K N(d2)).
    """
    if not forward > 0 or not expiry > 0 or not discount > 0 or not delta > 0:
        raise DomainError("Black needs a positive forward, expiry, discount and accrual")
    if strike < 0:
        raise DomainError(f"Black needs a non-negative strike, got {strike}")
    if strike == 0:
        return discount * delta * forward
    if not sigma > 0:
        if forward == strike:
            return 0.0
        raise DomainError(f"Black volatility must be positive, got {sigma}")
    spread = sigma * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * spread ** 2) / spread
    d2 = d1 - spread
    return discount * delta * (forward * norm.cdf(d1) - strike * norm.cdf(d2))


def black_vega(forward, strike, sigma, expiry, discount, delta):
    """
    Derivative of black_caplet in sigma, used to turn price standard errors
    into volatility standard errors.
    """
    if not forward > 0 or not strike > 0 or not sigma > 0 or not expiry > 0:
        raise DomainError("Vega needs a positive forward, strike, volatility and expiry")
    spread = sigma * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * spread ** 2) / spread
    return discount * delta * forward * norm.pdf(d1) * math.sqrt(expiry)


def implied_vol(
price, forward, strike, expiry, discount, delta):
    """
    Inverts black_caplet by bisection on the fixed bracket.
    """
    intrinsic = discount * delta * max(forward - strike, 0.0)
    ceiling = discount * delta * forward
    if not intrinsic < price < ceiling:
        raise NoSolutionError(
            f"Price {price:.6g} is outside the no-arbitrage range ({intrinsic:.6g}, {ceiling:.6g})"
        )
    low, high = IMPLIED_VOL_BRACKET

    def objective(sigma):
        return black_caplet(forward, strike, sigma, expiry, discount, delta) - price

    if objective(low) > 0 or objective(high) < 0:
        raise NoSolutionError(
            f"Price {price:.6g} is not bracketed by volatilities {low} and {high}"
        )
    return optimize.bisect(objective, low, high, xtol=1e-12, maxiter=200)


def smile_from_ensemble(ensemble, spec, curve):
    """
    One SmilePoint per strike, sorted by strike. Points priced at or below
    intrinsic value get a NaN implied volatility. Monte Carlo points carry
    the price standard error and its first-order image in volatility.
    """
    state = fixing_state(ensemble, spec)
    j = spec.fixing
    forward = curve.libor(j)
    expiry = float(ensemble.tenor.tenor_dates[j - 1])
    discount = curve.bond(j + 1)
    points = []
    for strike_mult in sorted(spec.strikes):
        price, std_err = caplet_price(ensemble, spec, curve, strike_mult, state)
        try:
            vol = implied_vol(price, forward, strike_mult * forward, expiry, discount, curve.delta)
        except NoSolutionError:
            vol = math.nan
        vol_std_err = 0.0
        if std_err > 0:
            vol_std_err = math.nan
            if not math.isnan(vol):
                vega = black_vega(forward, strike_mult * forward, vol, expiry, discount, curve.delta)
                if vega > 0:
                    vol_std_err = std_err / vega
        points.append(SmilePoint(strike_mult, price, vol, std_err, vol_std_err))
    return points


def model_ensemble(model, spec, config, progress=None):
    """
    Builds the path ensemble a smile model prices on, up to the fixing step.
    """
    if model not in MODELS:
        raise ValidationError(f"Unknown model {model!r}, expected one of {', '.join(MODELS)}")
    tenor = config.tenor_structure()
    spec.validate(tenor)
    curve = config.market_curve()
    surface = config.vol_surface(tenor)
    horizon = tenor.fixing_step(spec.fixing)
    pricing = config.pricing
    family = "atomic" if model.startswith("bernoulli") else "gaussian"
    driver = config.driver(family).scaled(tenor.dt)
    if model == "bernoulli-exact":
        return enumerate_tree(
            driver, curve, surface, horizon, pricing.path_limit, rates_from=spec.fixing
        )
    if model == "gz-mc":
        return simulate_gz(
            driver,
            curve,
            surface,
            horizon,
            pricing.paths,
            pricing.seed,
            rates_from=spec.fixing,
            keep_trajectory=False,
            batch_size=pricing.batch_size,
            progress=progress,
        )
    return simulate_paths(
        driver,
        curve,
        surface,
        horizon,
        pricing.paths,
        pricing.seed,
        rates_from=spec.fixing,
        keep_trajectory=False,
        batch_size=pricing.batch_size,
        progress=progress,
    )


def build_smile(model, spec, config, progress=None):
    ensemble = model_ensemble(model, spec, config, progress)
    return smile_from_ensemble(ensemble, spec, config.market_curve())


def compare_to_reference(points, reference, tolerance):
    """
    Deviation log rows of a smile against a printed table of vols.
    """
    if len(points) != len(reference):
        raise ValidationError(
            f"Smile has {len(points)} points, reference table has {len(reference)}"
        )
    rows = []
    for point, expected in zip(points, reference):
        deviation = point.implied_vol - expected
        rows.append(
            Deviation(
                point.strike_mult,
                point.implied_vol,
                expected,
                deviation,
                bool(abs(deviation) <= tolerance),
            )
        )
    return rows


def _vols(points):
    return {point.strike_mult: point.implied_vol for point in points}


def smile_ordering(smiles):
    """
    Cross-model ordering: the exact Bernoulli smile sits above both
    lognormal smiles, and the lognormal Monte Carlo smile starts above the
    deflated-bond one and ends below it. Strikes with a NaN vol in either
    smile are left out of a comparison.
    """
    checks = []
    exact = _vols(smiles["bernoulli-exact"]) if "bernoulli-exact" in smiles else None
    lognormal = _vols(smiles["lognormal-mc"]) if "lognormal-mc" in smiles else None
    gz = _vols(smiles["gz-mc"]) if "gz-mc" in smiles else None

    def shared(left, right):
        return [
            k for k in sorted(left) if k in right and not math.isnan(left[k]) and not math.isnan(right[k])
        ]

    for name, other in (("lognormal-mc", lognormal), ("gz-mc", gz)):
        if exact is None or other is None:
            continue
        strikes = shared(exact, other)
        checks.append(
            OrderingCheck(
                f"bernoulli-exact above {name}",
                bool(strikes) and all(exact[k] > other[k] for k in strikes),
                len(strikes),
            )
        )
    if lognormal is not None and gz is not None:
        strikes = shared(lognormal, gz)
        if strikes:
            lowest, highest = strikes[0], strikes[-1]
            checks.append(
                OrderingCheck(
                    "lognormal-mc above gz-mc at the lowest strike",
                    bool(lognormal[lowest] > gz[lowest]),
                    1,
                )
            )
            checks.append(
                OrderingCheck(
                    "lognormal-mc below gz-mc at the highest strike",
                    bool(lognormal[highest] < gz[highest]),
                    1,
                )
            )
    return checks
