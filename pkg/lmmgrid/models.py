"""
Evolution of the joint LIBOR vector under the terminal measure.

All states carry a leading path axis when they describe many paths at once;
a single step moves every live rate with the same increment x.
"""

import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy

from lmmgrid.constants import DEFAULT_BATCH_SIZE, DEFAULT_PATH_LIMIT
from lmmgrid.drift import (
    CompensatorContext,
    compensator_weight,
    martingale_residual,
    step_drifts,
    subset_expansion_weight,
)
from lmmgrid.driver import GaussianDriver, draw_increments
from lmmgrid.exceptions import HorizonError, SequencingError, SizeError, ValidationError
from lmmgrid.market import MeasureLedger, ell, forward_price, one_step_forward_ratio, tenor_bonds


@dataclass(frozen=True, eq=False)
class ModelState:
    """
    Rates L(t_i, T_j) at grid step `step`, the density ledger, and the drifts
    used to arrive here. Rates below `rates_from` are not simulated and stay
    at their initial values; fixed rates keep their fixing values.
    """

    tenor: object
    step: int
    rates: numpy.ndarray
    ledger: MeasureLedger
    drift_record: Optional[numpy.ndarray] = None
    rates_from: int = 1

    @classmethod
    def initial(cls, curve, batch_shape=(), rates_from=1):
        if not 1 <= rates_from <= curve.n:
            raise ValidationError(f"rates_from must lie in 1..{curve.n}, got {rates_from}")
        shape = tuple(batch_shape) + (curve.n,)
        rates = numpy.broadcast_to(curve.initial_libors, shape).copy()
        return cls(
            curve.tenor, 0, rates, MeasureLedger.start(curve.n, batch_shape), None, rates_from
        )

    @property
    def batch_shape(self):
        return self.rates.shape[:-1]


def _step(state, x, lambda_row, drifts, update):
    tenor = state.tenor
    i = state.step + 1
    if i > tenor.m:
        raise SequencingError(f"State is already at the last grid step {tenor.m}")
    if drifts is None:
        raise SequencingError(f"No drifts supplied for step {i}")
    active = tenor.active(i, state.rates_from)
    drifts = numpy.asarray(drifts, dtype=float)
    missing = ~numpy.all(numpy.isfinite(drifts), axis=tuple(range(drifts.ndim - 1))) & active
    if numpy.any(missing):
        raise SequencingError(
            f"Missing drift for rate {int(numpy.flatnonzero(missing)[0]) + 1} at step {i}"
        )
    x = numpy.asarray(x, dtype=float)[..., None]
    exponent = numpy.where(active, lambda_row * (x + numpy.where(active, drifts, 0.0)), 0.0)
    rates = numpy.where(active, update(state.rates, exponent), state.rates)
    ledger = state.ledger.advance(rates, state.rates, tenor.delta)
    return ModelState(tenor, i, rates, ledger, drifts, state.rates_from)


def step_exponential(state, x, lambda_row, drifts):
    """
    L(t_i, T_j) = L(t_{i-1}, T_j) exp(lambda_ij (x + b^j)) for every live rate.
    """
    return _step(state, x, lambda_row, drifts, lambda rates, e: rates * numpy.exp(e))


def step_difference(state, x, lambda_row, drifts):
    """
    Adds Delta L = L(t_{i-1}, T_j) (exp(lambda_ij (x + b^j)) - 1), the
    jump-measure form of the same dynamics.
    """
    return _step(state, x, lambda_row, drifts, lambda rates, e: rates + rates * numpy.expm1(e))


STEPPERS = {"exponential": step_exponential, "difference": step_difference}


def advance(state, x, driver, surface, stepper="exponential"):
    """
    Computes the step's drifts from the state at t_{i-1}, then moves the rates.
    """
    i = state.step + 1
    if i > state.tenor.m:
        raise SequencingError(f"State is already at the last grid step {state.tenor.m}")
    drifts = step_drifts(
        driver,
        surface.row(i),
        state.rates,
        state.tenor.delta,
        state.tenor.active(i, state.rates_from),
        i,
    )
    return STEPPERS[stepper](state, x, surface.row(i), drifts)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """
    Paths under the terminal measure with their probabilities (trees) or
    weights 1/N (Monte Carlo). `trajectory` is (paths, horizon + 1, n) when
    recorded; `final` always holds the state at `horizon`.
    """

    tenor: object
    horizon: int
    weights: numpy.ndarray
    final: ModelState
    trajectory: Optional[numpy.ndarray] = None
    seed: Optional[int] = None
    exact: bool = False

    @property
    def count(self):
        return self.weights.size

    def state_at(self, i):
        if not 0 <= i <= self.horizon:
            raise HorizonError(f"Step {i} is outside the ensemble horizon {self.horizon}")
        if i == self.horizon:
            return self.final
        if self.trajectory is None:
            raise HorizonError(f"Step {i} was not recorded, only the final state was kept")
        rates = self.trajectory[:, : i + 1, :]
        ratios = numpy.ones((self.count, self.tenor.n))
        for s in range(1, i + 1):
            ratios = ratios * one_step_forward_ratio(rates[:, s], rates[:, s - 1], self.tenor.delta)
        return ModelState(
            self.tenor, i, rates[:, i].copy(), MeasureLedger(ratios), None, self.final.rates_from
        )


def _check_horizon(tenor, horizon):
    if int(horizon) != horizon or not 0 <= horizon <= tenor.m:
        raise HorizonError(f"Horizon {horizon} is outside the grid 0..{tenor.m}")


def _expand(state, parent):
    return ModelState(
        state.tenor,
        state.step,
        state.rates[parent],
        MeasureLedger(state.ledger.ratios[parent]),
        None,
        state.rates_from,
    )


def enumerate_tree(
    driver,
    curve,
    surface,
    horizon,
    path_limit=DEFAULT_PATH_LIMIT,
    stepper="exponential",
    rates_from=1,
):
    """
    Every path of an atomic driver up to `horizon`, with exact probabilities.
    Children of a node are ordered like the driver's atoms.
    """
    if driver.kind != "atomic":
        raise ValidationError("Only atomic drivers have finite trees")
    tenor = curve.tenor
    _check_horizon(tenor, horizon)
    atoms = len(driver.values)
    if atoms ** horizon > path_limit:
        raise SizeError(
            f"{atoms}^{horizon} paths exceed the path limit of {path_limit}"
        )
    values = numpy.asarray(driver.values)
    probabilities = numpy.asarray(driver.probabilities)
    state = ModelState.initial(curve, (1,), rates_from)
    weights = numpy.ones(1)
    trajectory = state.rates[:, None, :]
    for i in range(1, horizon + 1):
        drifts = step_drifts(
            driver, surface.row(i), state.rates, tenor.delta, tenor.active(i, rates_from), i
        )
        nodes = weights.size
        parent = numpy.repeat(numpy.arange(nodes), atoms)
        state = STEPPERS[stepper](
            _expand(state, parent), numpy.tile(values, nodes), surface.row(i), drifts[parent]
        )
        weights = weights[parent] * numpy.tile(probabilities, nodes)
        trajectory = numpy.concatenate((trajectory[parent], state.rates[:, None, :]), axis=1)
    return PathEnsemble(tenor, horizon, weights, state, trajectory, None, True)


def _concatenate(states, trajectories, tenor, horizon, rates_from):
    final = ModelState(
        tenor,
        horizon,
        numpy.concatenate([state.rates for state in states]),
        MeasureLedger(numpy.concatenate([state.ledger.ratios for state in states])),
        None
        if states[0].drift_record is None
        else numpy.concatenate([state.drift_record for state in states]),
        rates_from,
    )
    trajectory = numpy.concatenate(trajectories) if trajectories else None
    return final, trajectory


def simulate_paths(
    driver,
    curve,
    surface,
    horizon,
    n_paths,
    seed,
    stepper="exponential",
    rates_from=1,
    keep_trajectory=True,
    batch_size=DEFAULT_BATCH_SIZE,
    progress=None,
):
    """
    Monte Carlo paths under the terminal measure. Path k draws from its own
    stream (seed, k), and the drifts are recomputed from each path's state at
    every step.
    """
    if int(n_paths) != n_paths or n_paths < 1:
        raise ValidationError(f"Need at least one path, got {n_paths}")
    tenor = curve.tenor
    _check_horizon(tenor, horizon)
    states, trajectories = [], []
    for first in range(0, n_paths, batch_size):
        count = min(batch_size, n_paths - first)
        draws = draw_increments(driver, seed, first, count, horizon)
        state = ModelState.initial(curve, (count,), rates_from)
        path = [state.rates]
        for i in range(1, horizon + 1):
            state = advance(state, draws[:, i - 1], driver, surface, stepper)
            if keep_trajectory:
                path.append(state.rates)
        states.append(state)
        if keep_trajectory:
            trajectories.append(numpy.stack(path, axis=1))
        if progress is not None:
            progress(count)
    final, trajectory = _concatenate(states, trajectories, tenor, horizon, rates_from)
    weights = numpy.full(n_paths, 1.0 / n_paths)
    return PathEnsemble(tenor, horizon, weights, final, trajectory, seed, False)


@dataclass(frozen=True, eq=False)
class GzState:
    """
    Deflated bond differences W_j(i), j = 1..n, at grid step `step`.
    """

    step: int
    W: numpy.ndarray


def _above(values):
    """
    Sums over k > j along the last axis.
    """
    tail = numpy.cumsum(values[..., ::-1], axis=-1)[..., ::-1]
    zeros = numpy.zeros(values.shape[:-1] + (1,))
    return numpy.concatenate((tail[..., 1:], zeros), axis=-1)


def gz_init(curve):
    """
    Inverts L_j = W_j / (delta (1 + W_{j+1} + ... + W_n)) at time zero.
    """
    W = numpy.empty(curve.n)
    running = 0.0
    for j in range(curve.n - 1, -1, -1):
        W[j] = curve.delta * curve.initial_libors[j] * (1.0 + running)
        running += W[j]
    return GzState(0, W)


def gz_rates(state, delta):
    return state.W / (delta * (1.0 + _above(state.W)))


def gz_step(state, Y, lambda_row, variance=1.0, active=None):
    """
    W_j <- W_j exp(-sigma_j^2 v / 2 + sigma_j sqrt(v) Y) with
    sigma_j = lambda_ij + sum_{k>j} lambda_ik W_k / (1 + W_k + ... + W_n),
    evaluated on the W values before the step.
    """
    W = state.W
    tail = numpy.cumsum(W[..., ::-1], axis=-1)[..., ::-1]
    sigma = lambda_row + _above(lambda_row * W / (1.0 + tail))
    Y = numpy.asarray(Y, dtype=float)[..., None]
    moved = W * numpy.exp(-0.5 * sigma ** 2 * variance + sigma * numpy.sqrt(variance) * Y)
    if active is not None:
        moved = numpy.where(active, moved, W)
    return GzState(state.step + 1, moved)


def simulate_gz(
    driver,
    curve,
    surface,
    horizon,
    n_paths,
    seed,
    rates_from=1,
    keep_trajectory=True,
    batch_size=DEFAULT_BATCH_SIZE,
    progress=None,
):
    """
    Monte Carlo of the deflated-bond scheme. The Gaussian driver's per-step
    variance is the step length; fixed rates keep their fixing values.
    """
    if driver.kind != "gaussian":
        raise ValidationError("The deflated-bond scheme needs a Gaussian driver")
    if int(n_paths) != n_paths or n_paths < 1:
        raise ValidationError(f"Need at least one path, got {n_paths}")
    tenor = curve.tenor
    _check_horizon(tenor, horizon)
    standard = GaussianDriver(1.0)
    start = gz_init(curve)
    states, trajectories = [], []
    for first in range(0, n_paths, batch_size):
        count = min(batch_size, n_paths - first)
        draws = draw_increments(standard, seed, first, count, horizon)
        gz = GzState(0, numpy.broadcast_to(start.W, (count, curve.n)).copy())
        state = ModelState.initial(curve, (count,), rates_from)
        path = [state.rates]
        for i in range(1, horizon + 1):
            active = tenor.active(i, rates_from)
            gz = gz_step(gz, draws[:, i - 1], surface.row(i), driver.variance, active)
            rates = numpy.where(active, gz_rates(gz, tenor.delta), state.rates)
            ledger = state.ledger.advance(rates, state.rates, tenor.delta)
            state = ModelState(tenor, i, rates, ledger, None, rates_from)
            if keep_trajectory:
                path.append(rates)
        states.append(state)
        if keep_trajectory:
            trajectories.append(numpy.stack(path, axis=1))
        if progress is not None:
            progress(count)
    final, trajectory = _concatenate(states, trajectories, tenor, horizon, rates_from)
    weights = numpy.full(n_paths, 1.0 / n_paths)
    return PathEnsemble(tenor, horizon, weights, final, trajectory, seed, False)


TreeDiagnostics = namedtuple(
    "TreeDiagnostics",
    ["paths", "probability_error", "max_residual", "max_expansion_gap", "bond_error"],
)


def tree_diagnostics(driver, curve, surface, horizon, path_limit=DEFAULT_PATH_LIMIT):
    """
    Enumerates the tree and re-checks it: total probability, the martingale
    residual of every drift used, and the product form of the one-step
    density against its subset expansion. The bond check compares the
    expected bond ratios B(T_i, T_j) / B(T_i, T_{n+1}) at every tenor date
    inside the horizon with the ratios read off the initial curve.
    """
    ensemble = enumerate_tree(driver, curve, surface, horizon, path_limit)
    tenor = curve.tenor
    residual = 0.0
    gap = 0.0
    for i in range(1, horizon + 1):
        rates = ensemble.trajectory[:, i - 1, :]
        row = surface.row(i)
        active = tenor.active(i)
        drifts = step_drifts(driver, row, rates, tenor.delta, active, i)
        ells = ell(rates, tenor.delta)
        for j in numpy.flatnonzero(active) + 1:
            ctx = CompensatorContext(i, j, ells[:, j:], row[j - 1 :], drifts[:, j:])
            value = martingale_residual(driver, ctx, drifts[:, j - 1])
            residual = max(residual, float(numpy.max(numpy.abs(value))))
            for x in driver.values:
                difference = compensator_weight(x, ctx) - subset_expansion_weight(x, ctx)
                gap = max(gap, float(numpy.max(numpy.abs(difference))))
    probability_error = abs(math.fsum(ensemble.weights) - 1.0)
    return TreeDiagnostics(
        ensemble.count, probability_error, residual, gap, bond_error(ensemble, curve)
    )


def bond_error(ensemble, curve):
    """
    Largest relative gap between E[B(T_i, T_j) / B(T_i, T_{n+1})] over the
    ensemble and B(0, T_j) / B(0, T_{n+1}) = prod_{u >= j} (1 + delta L(0, T_u)).
    """
    tenor = curve.tenor
    libors = numpy.asarray(curve.initial_libors, dtype=float)
    worst = 0.0
    for i in range(1, tenor.n + 1):
        step = i * tenor.p
        if step > ensemble.horizon:
            break
        bonds = tenor_bonds(ensemble.trajectory[:, step, :], tenor, i)
        ratios = bonds / bonds[:, -1:]
        forwards = forward_price(libors[i - 1 :], tenor.delta)
        expected = numpy.append(numpy.cumprod(forwards[::-1])[::-1], 1.0)
        mean = ensemble.weights @ ratios
        worst = max(worst, float(numpy.max(numpy.abs(mean / expected - 1.0))))
    return worst
