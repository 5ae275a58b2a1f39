"""
Martingale-restoring drifts b^j_{t_i}.

The P_{j+1}-expectation of exp(lambda_ij X) is taken under the terminal
measure, reweighted by the one-step density dP_{j+1}/dP_{n+1}:

    w(x) = prod_{k=j+1..n} ( ell_k (exp(lambda_ik (x + b^k)) - 1) + 1 )

so b^j depends on every higher drift and the recursion runs j = n, n-1, ...
"""

import itertools
from dataclasses import dataclass

import numpy
from scipy.special import logsumexp

from lmmgrid.constants import MAX_SUBSET_FACTORS
from lmmgrid.exceptions import (
    DegenerateVolError,
    DomainError,
    SequencingError,
    SizeError,
    ValidationError,
)
from lmmgrid.market import ell


@dataclass(frozen=True, eq=False)
class CompensatorContext:
    """
    Everything the drift of `rate` at `step` depends on: ell(t_{i-1}, T_k)
    and b^k_{t_i} for k = rate+1..n (leading axes are paths), and the
    volatility row lambda_ik for k = rate..n.
    """

    step: int
    rate: int
    ell_values: numpy.ndarray
    lambda_row: numpy.ndarray
    higher_drifts: numpy.ndarray

    def __post_init__(self):
        ells = numpy.asarray(self.ell_values, dtype=float)
        row = numpy.asarray(self.lambda_row, dtype=float)
        drifts = numpy.asarray(self.higher_drifts, dtype=float)
        if row.ndim != 1 or row.size < 1:
            raise ValidationError("Volatility row must be a non-empty vector")
        if ells.shape[-1:] != (row.size - 1,) or drifts.shape[-1:] != (row.size - 1,):
            raise ValidationError(
                f"Rate {self.rate}: {row.size - 1} higher factors, got ell shape "
                f"{ells.shape} and drift shape {drifts.shape}"
            )
        if numpy.any(ells < 0) or numpy.any(ells >= 1):
            raise DomainError(f"Rate {self.rate}: ell values must lie in [0, 1)")
        if not numpy.all(numpy.isfinite(drifts)):
            raise SequencingError(
                f"Rate {self.rate} at step {self.step}: higher drifts are not all computed"
            )
        object.__setattr__(self, "ell_values", ells)
        object.__setattr__(self, "lambda_row", row)
        object.__setattr__(self, "higher_drifts", drifts)

    @property
    def factors(self):
        return self.lambda_row.size - 1

    @property
    def lam(self):
        return float(self.lambda_row[0])

    @property
    def higher_lambdas(self):
        return self.lambda_row[1:]


def _output(value):
    value = numpy.asarray(value)
    return float(value) if value.ndim == 0 else value


def compensator_weight(x, ctx):
    """
    One-step density dP_{j+1}/dP_{n+1} evaluated at increment x.
    """
    x = numpy.asarray(x, dtype=float)[..., None]
    exponent = ctx.higher_lambdas * (x + ctx.higher_drifts)
    return _output(numpy.prod(ctx.ell_values * numpy.expm1(exponent) + 1.0, axis=-1))


def subset_expansion_weight(x, ctx):
    """
    Same weight expanded over all subsets of the higher rates.
    """
    if ctx.factors > MAX_SUBSET_FACTORS:
        raise SizeError(f"{ctx.factors} factors give too many subsets to enumerate")
    x = numpy.asarray(x, dtype=float)[..., None]
    grown = ctx.ell_values * numpy.exp(ctx.higher_lambdas * (x + ctx.higher_drifts))
    kept = 1.0 - ctx.ell_values
    total = 0.0
    for members in itertools.product((False, True), repeat=ctx.factors):
        mask = numpy.array(members, dtype=bool)
        total = total + numpy.prod(numpy.where(mask, grown, kept), axis=-1)
    return _output(total)


def _check(driver, ctx, kind):
    if driver.kind != kind:
        raise ValidationError(f"Expected a {kind} driver, got {driver.kind}")
    if not ctx.lam > 0:
        raise DegenerateVolError(
            f"Rate {ctx.rate} has zero volatility at step {ctx.step} while alive"
        )
    if ctx.lam + float(numpy.sum(ctx.higher_lambdas)) > driver.mgf_bound:
        raise DomainError(
            f"Rate {ctx.rate} at step {ctx.step}: exponents exceed the driver's "
            f"integrability bound {driver.mgf_bound}"
        )


def drift_atomic(driver, ctx):
    _check(driver, ctx, "atomic")
    terms = [
        numpy.log(probability) + ctx.lam * value + numpy.log(compensator_weight(value, ctx))
        for value, probability in zip(driver.values, driver.probabilities)
    ]
    return _output(-logsumexp(numpy.stack(terms, axis=-1), axis=-1) / ctx.lam)


def _key(exponent):
    return round(float(exponent), 12)


def gaussian_expansion(ctx, merge=True, lead=None):
    """
    Writes exp(lead X) w(X) as sum_s c_s exp(u_s X). Returns the exponents
    u_s (path independent) and coefficients c_s (leading axes are paths).
    `lead` defaults to lambda_ij. Merging joins subsets with equal exponents.
    """
    if ctx.factors > MAX_SUBSET_FACTORS:
        raise SizeError(f"{ctx.factors} factors give too many subsets to expand")
    lead = ctx.lam if lead is None else lead
    grown = ctx.ell_values * numpy.exp(ctx.higher_lambdas * ctx.higher_drifts)
    kept = 1.0 - ctx.ell_values
    batch = numpy.broadcast(grown[..., 0:1], kept[..., 0:1]).shape[:-1] if ctx.factors else ()
    if not merge:
        exponents = []
        coefficients = []
        for members in itertools.product((False, True), repeat=ctx.factors):
            mask = numpy.array(members, dtype=bool)
            exponents.append(lead + float(numpy.sum(ctx.higher_lambdas[mask])))
            coefficients.append(numpy.prod(numpy.where(mask, grown, kept), axis=-1))
        return numpy.array(exponents), numpy.stack(numpy.broadcast_arrays(*coefficients), axis=-1)

    exponents = [lead]
    coefficients = numpy.ones((1,) + batch)  # exponent axis first while building
    for k in range(ctx.factors):
        shift = ctx.higher_lambdas[k]
        keys = {_key(u): index for index, u in enumerate(exponents)}
        targets = []
        for u in list(exponents):
            key = _key(u + shift)
            if key not in keys:
                keys[key] = len(exponents)
                exponents.append(u + shift)
            targets.append(keys[key])
        updated = numpy.zeros((len(exponents),) + batch)
        updated[: coefficients.shape[0]] = coefficients * kept[..., k]
        numpy.add.at(updated, numpy.array(targets), coefficients * grown[..., k])
        coefficients = updated
    return numpy.array(exponents), numpy.moveaxis(coefficients, 0, -1)


def drift_gaussian(driver, ctx, merge=True):
    _check(driver, ctx, "gaussian")
    exponents, coefficients = gaussian_expansion(ctx, merge=merge)
    scaled = numpy.broadcast_to(0.5 * driver.variance * exponents ** 2, coefficients.shape)
    log_sum = logsumexp(scaled, b=coefficients, axis=-1)
    return _output(-log_sum / ctx.lam)


def drift(driver, ctx):
    if driver.kind == "atomic":
        return drift_atomic(driver, ctx)
    return drift_gaussian(driver, ctx)


def martingale_residual(driver, ctx, b):
    """
    E_{P_{j+1}}[exp(lambda (X + b)) | F_{t_{i-1}}] - 1, computed under the
    terminal measure and normalized by the conditional mass of the density.
    """
    b = numpy.asarray(b, dtype=float)
    if driver.kind == "atomic":
        values = numpy.asarray(driver.values)
        probabilities = numpy.asarray(driver.probabilities)
        weights = numpy.stack([compensator_weight(x, ctx) for x in values], axis=-1)
        growth = numpy.exp(ctx.lam * (values + b[..., None]))
        numerator = numpy.sum(probabilities * growth * weights, axis=-1)
        denominator = numpy.sum(probabilities * weights, axis=-1)
    else:
        exponents, coefficients = gaussian_expansion(ctx)
        numerator = numpy.exp(ctx.lam * b) * numpy.sum(
            coefficients * numpy.exp(0.5 * driver.variance * exponents ** 2), axis=-1
        )
        exponents, coefficients = gaussian_expansion(ctx, lead=0.0)
        denominator = numpy.sum(
            coefficients * numpy.exp(0.5 * driver.variance * exponents ** 2), axis=-1
        )
    return _output(numerator / denominator - 1.0)


def step_drifts(driver, lambda_row, rates, delta, active, step):
    """
    Every active drift for `step`, from the rates at t_{i-1}. Inactive
    (fixed or unsimulated) rates get NaN.
    """
    rates = numpy.asarray(rates, dtype=float)
    lambda_row = numpy.asarray(lambda_row, dtype=float)
    n = rates.shape[-1]
    ells = numpy.asarray(ell(rates, delta))
    drifts = numpy.full(rates.shape, numpy.nan)
    for j in range(n, 0, -1):
        if not active[j - 1]:
            continue
        ctx = CompensatorContext(
            step=step,
            rate=j,
            ell_values=ells[..., j:],
            lambda_row=lambda_row[j - 1 :],
            higher_drifts=drifts[..., j:],
        )
        drifts[..., j - 1] = drift(driver, ctx)
    return drifts
