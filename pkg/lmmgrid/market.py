"""
Tenor grid, initial curve, bonds, forwards and the forward-measure densities.

Rates are indexed 1..n in the public API and 0..n-1 in arrays. Every array
helper broadcasts over leading (path) axes, with the rate axis last.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy
from scipy import integrate

from lmmgrid.exceptions import DomainError, RateIndexError, ValidationError


def _output(value):
    """
    Unwraps zero-dimensional arrays into plain floats.
    """
    value = numpy.asarray(value)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class TenorStructure:
    """
    Grid t_i = (i/m) T* for i = 0..m, m = (n+1)p, and tenor dates
    T_j = (j/(n+1)) T* for j = 1..n+1. Rate j fixes at step j*p.
    """

    t_star: float
    n: int
    p: int = 1

    def __post_init__(self):
        if not self.t_star > 0:
            raise ValidationError(f"Horizon must be positive, got {self.t_star}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"Need at least one rate, got n={self.n}")
        if int(self.p) != self.p or self.p < 1:
            raise ValidationError(f"Sub-steps per period must be >= 1, got p={self.p}")

    @property
    def m(self):
        return (self.n + 1) * self.p

    @property
    def delta(self):
        return self.t_star / (self.n + 1)

    @property
    def dt(self):
        return self.t_star / self.m

    @property
    def grid_times(self):
        return numpy.arange(self.m + 1) / self.m * self.t_star

    @property
    def tenor_dates(self):
        return numpy.arange(1, self.n + 2) / (self.n + 1) * self.t_star

    def eta(self, i):
        """
        Smallest tenor index u with t_i <= T_u (0 at t_0).
        """
        if not 0 <= i <= self.m:
            raise RateIndexError(f"Step {i} is outside the grid 0..{self.m}")
        return -(-i // self.p)

    def fixing_step(self, j):
        if not 1 <= j <= self.n + 1:
            raise RateIndexError(f"Tenor index {j} is outside 1..{self.n + 1}")
        return j * self.p

    def active(self, i, rates_from=1):
        """
        Mask of rates that move on step i: not yet fixed and simulated.
        """
        j = numpy.arange(1, self.n + 1)
        return (j * self.p >= i) & (j >= rates_from)

    def refine(self, p):
        return dataclasses.replace(self, p=p)


def initial_bonds(curve_rates, tenor, normalization=1.0):
    """
    B(0, T_1..T_{n+1}) from the initial LIBORs, with B(0, T_1) = normalization.
    """
    rates = numpy.asarray(curve_rates, dtype=float)
    if rates.shape != (tenor.n,):
        raise ValidationError(
            f"Expected {tenor.n} initial rates, got {rates.shape[0] if rates.ndim else 0}"
        )
    if numpy.any(rates < 0):
        raise ValidationError("Initial rates must not be negative")
    if not normalization > 0:
        raise ValidationError(f"Bond normalization must be positive, got {normalization}")
    growth = numpy.concatenate(([1.0], numpy.cumprod(1.0 + tenor.delta * rates)))
    return normalization / growth


def ell(L_prev, delta):
    """
    The measure-change factor delta*L / (1 + delta*L).
    """
    rate = numpy.asarray(L_prev, dtype=float)
    if numpy.any(rate <= 0) or not delta > 0:
        raise DomainError("ell needs positive rates and a positive accrual")
    return _output(delta * rate / (1.0 + delta * rate))


def forward_price(L, delta):
    """
    F_B(t, T_l, T_{l+1}) = 1 + delta * L(t, T_l).
    """
    return _output(1.0 + delta * numpy.asarray(L, dtype=float))


def one_step_forward_ratio(L_new, L_prev, delta):
    new = numpy.asarray(L_new, dtype=float)
    prev = numpy.asarray(L_prev, dtype=float)
    if numpy.any(new <= 0) or numpy.any(prev <= 0):
        raise DomainError("Forward ratios need positive rates")
    return _output((1.0 + delta * new) / (1.0 + delta * prev))


def tenor_bonds(rates, tenor, i):
    """
    B(T_i, T_j) for j = i..n+1 from the rates L(T_i, T_u) observed at T_i.
    `rates` is the full rate vector; entries for u < i are ignored.
    """
    if not 1 <= i <= tenor.n:
        raise RateIndexError(f"Tenor bonds need 1 <= i <= {tenor.n}, got {i}")
    rates = numpy.asarray(rates, dtype=float)
    live = rates[..., i - 1 :]
    discounts = 1.0 / numpy.cumprod(1.0 + tenor.delta * live, axis=-1)
    ones = numpy.ones(live.shape[:-1] + (1,))
    return numpy.concatenate((ones, discounts), axis=-1)


@dataclass(frozen=True, eq=False)
class MarketCurve:
    """
    Initial LIBOR curve L(0, T_j), j = 1..n, and the bond prices it implies.
    """

    initial_libors: numpy.ndarray
    tenor: TenorStructure
    normalization: float = 1.0

    def __post_init__(self):
        libors = numpy.array(self.initial_libors, dtype=float)
        if libors.shape != (self.tenor.n,):
            raise ValidationError(
                f"Curve has {libors.size} rates but the tenor models {self.tenor.n}"
            )
        bad = numpy.flatnonzero(libors <= 0)
        if bad.size:
            raise ValidationError(f"Initial rate for T_{bad[0] + 1} must be positive")
        libors.setflags(write=False)
        object.__setattr__(self, "initial_libors", libors)
        # Validates the normalization too
        bonds = initial_bonds(libors, self.tenor, self.normalization)
        bonds.setflags(write=False)
        object.__setattr__(self, "_bonds", bonds)

    @property
    def n(self):
        return self.tenor.n

    @property
    def delta(self):
        return self.tenor.delta

    @property
    def initial_bonds(self):
        return self._bonds

    def bond(self, j):
        """
        B(0, T_j) for j = 1..n+1.
        """
        if not 1 <= j <= self.n + 1:
            raise RateIndexError(f"No bond for tenor index {j}")
        return float(self._bonds[j - 1])

    def libor(self, j):
        if not 1 <= j <= self.n:
            raise RateIndexError(f"No rate for tenor index {j}")
        return float(self.initial_libors[j - 1])

    def with_tenor(self, tenor):
        return MarketCurve(self.initial_libors, tenor, self.normalization)


@dataclass(frozen=True)
class LimitVolatility:
    """
    Affine limit volatility lambda(t, T_j) = level + slope * t.
    """

    level: float
    slope: float = 0.0

    def __call__(self, t):
        return self.level + self.slope * numpy.asarray(t, dtype=float)

    def check(self, horizon):
        if not (self.level > 0 and self.level + self.slope * horizon > 0):
            raise ValidationError(
                f"Limit volatility {self.level} + {self.slope}t is not positive on [0, {horizon}]"
            )

    def total_variance(self, t0, t1):
        value, _ = integrate.quad(lambda s: float(self(s)) ** 2, t0, t1)
        return value


@dataclass(frozen=True, eq=False)
class VolSurface:
    """
    lambdas[i, j-1] is the sensitivity of rate j to the step-i increment.
    Row 0 is carried for indexing only; the dynamics start at step 1.
    """

    lambdas: numpy.ndarray
    limit_lambdas: Optional[Tuple[LimitVolatility, ...]] = None

    def row(self, i):
        return self.lambdas[i]

    def column(self, j):
        return self.lambdas[1:, j - 1]

    def validate(self, tenor):
        if self.lambdas.shape != (tenor.m + 1, tenor.n):
            raise ValidationError(
                f"Vol surface shape {self.lambdas.shape} does not match grid "
                f"({tenor.m + 1}, {tenor.n})"
            )
        for j in range(1, tenor.n + 1):
            live = self.lambdas[1 : tenor.fixing_step(j) + 1, j - 1]
            if not numpy.all(numpy.isfinite(live)) or numpy.any(live <= 0):
                step = 1 + int(numpy.flatnonzero(~(live > 0))[0])
                raise ValidationError(
                    f"Volatility of rate {j} at step {step} must be positive while it is alive"
                )
        return self

    @classmethod
    def constant(cls, tenor, per_rate: Sequence[float]):
        per_rate = numpy.asarray(per_rate, dtype=float)
        if per_rate.ndim != 1 or per_rate.size < tenor.n:
            raise ValidationError(
                f"Missing volatility for rate {per_rate.size + 1} of {tenor.n}"
            )
        if per_rate.size > tenor.n:
            raise ValidationError(f"Got {per_rate.size} volatilities for {tenor.n} rates")
        lambdas = numpy.tile(per_rate, (tenor.m + 1, 1))
        return cls(lambdas).validate(tenor)

    @classmethod
    def from_matrix(cls, tenor, rows):
        """
        Accepts m rows (steps 1..m) or m+1 rows (steps 0..m).
        """
        rows = [list(row) for row in rows]
        for i, row in enumerate(rows):
            if len(row) != tenor.n:
                raise ValidationError(
                    f"Volatility row {i} has {len(row)} entries, missing rate {len(row) + 1}"
                    if len(row) < tenor.n
                    else f"Volatility row {i} has {len(row)} entries for {tenor.n} rates"
                )
        lambdas = numpy.asarray(rows, dtype=float)
        if lambdas.shape[0] == tenor.m:
            lambdas = numpy.vstack((lambdas[:1], lambdas))
        elif lambdas.shape[0] != tenor.m + 1:
            raise ValidationError(
                f"Need {tenor.m} or {tenor.m + 1} volatility rows, got {lambdas.shape[0]}"
            )
        return cls(lambdas).validate(tenor)

    @classmethod
    def from_limits(cls, tenor, functions: Sequence[LimitVolatility]):
        """
        Samples each limit function at the left end t_{i-1} of step i.
        """
        functions = tuple(functions)
        if len(functions) != tenor.n:
            raise ValidationError(
                f"Need {tenor.n} limit volatility functions, got {len(functions)}"
            )
        for function in functions:
            function.check(tenor.t_star)
        left = numpy.concatenate(([0.0], tenor.grid_times[:-1]))
        lambdas = numpy.column_stack([function(left) for function in functions])
        return cls(lambdas, limit_lambdas=functions).validate(tenor)


@dataclass(frozen=True, eq=False)
class MeasureLedger:
    """
    Accumulated one-step forward-price ratios per rate. The product over
    rates l = j..n is the density dP_j/dP_{n+1} at the ledger's time.
    """

    ratios: numpy.ndarray

    @classmethod
    def start(cls, n, batch_shape=()):
        return cls(numpy.ones(tuple(batch_shape) + (n,)))

    @property
    def n(self):
        return self.ratios.shape[-1]

    def advance(self, new_rates, prev_rates, delta):
        return MeasureLedger(self.ratios * one_step_forward_ratio(new_rates, prev_rates, delta))

    def terminal_density(self, j):
        if not 1 <= j <= self.n + 1:
            raise RateIndexError(f"No forward measure for tenor index {j}")
        return _output(numpy.prod(self.ratios[..., j - 1 :], axis=-1))


def terminal_rn_weight(state, j):
    """
    dP_j/dP_{n+1} at the state's time: the product over l = j..n of
    (1 + delta L(t_i, T_l)) / (1 + delta L(0, T_l)).
    """
    tenor = state.tenor
    if j == tenor.n + 1:
        return state.ledger.terminal_density(j)
    if not 1 <= j <= tenor.n:
        raise RateIndexError(f"No forward measure for tenor index {j}")
    if tenor.fixing_step(j) < state.step:
        raise RateIndexError(
            f"Rate {j} fixed at step {tenor.fixing_step(j)}, state is at step {state.step}"
        )
    if j < state.rates_from:
        raise RateIndexError(f"Rate {j} is not simulated (rates start at {state.rates_from})")
    return state.ledger.terminal_density(j)
