import math

import numpy
import pytest

from lmmgrid.convergence import (
    ConvergenceRow,
    ConvergenceSpec,
    LognormalLaw,
    ks_distance,
    lattice_distribution,
    refine_experiment,
    summarize,
)
from lmmgrid.driver import make_driver
from lmmgrid.exceptions import SizeError, ValidationError
from lmmgrid.market import LimitVolatility, MarketCurve, TenorStructure, VolSurface
from lmmgrid.models import enumerate_tree
from lmmgrid.pricing import CapletSpec, caplet_price

LIMITS = (LimitVolatility(0.2), LimitVolatility(0.25))


@pytest.fixture
def small_curve():
    return MarketCurve((0.03, 0.035), TenorStructure(3.0, 2))


def spec(driver, mode, levels=(1, 2, 3), **kwargs):
    return ConvergenceSpec(levels=levels, limit_lambdas=LIMITS, driver=driver, mode=mode, **kwargs)


def test_lognormal_law():
    law = LognormalLaw(0.03, 0.16)
    assert law.distribution.mean() == pytest.approx(0.03)
    assert law.cdf(0.03 * math.exp(-0.08)) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        LognormalLaw(0.03, 0.0)


def test_ks_distance_of_a_matching_sample():
    law = LognormalLaw(0.03, 0.16)
    sample = law.rvs(4000, random_state=11)
    assert ks_distance(sample, law) < 2.0 / math.sqrt(4000)
    equal = numpy.ones(sample.size)
    assert ks_distance(sample, law, equal) == pytest.approx(ks_distance(sample, law), abs=1e-12)


def test_ks_distance_of_a_point_mass():
    law = LognormalLaw(0.03, 0.16)
    median = 0.03 * math.exp(-0.08)
    assert ks_distance([median], law, [1.0]) == pytest.approx(0.5)
    assert ks_distance([10.0], law, [2.0]) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        ks_distance([1.0, 2.0], law, [1.0])
    with pytest.raises(ValidationError):
        ks_distance([], law)


def test_lattice_is_a_martingale(coin, small_curve):
    tenor = small_curve.tenor.refine(8)
    surface = VolSurface.from_limits(tenor, LIMITS)
    values, weights = lattice_distribution(coin.scaled(tenor.dt), small_curve.with_tenor(tenor), surface, 2)
    assert values.size == 17
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-14)
    assert math.fsum(values * weights) == pytest.approx(0.035, rel=1e-12)


def test_lattice_rejections(coin, small_curve):
    surface = VolSurface.from_limits(small_curve.tenor, LIMITS)
    with pytest.raises(ValidationError):
        lattice_distribution(coin, small_curve, surface, 1)
    root = math.sqrt(2.0)
    three = make_driver({"kind": "atomic", "atoms": [[-root, 0.25], [0.0, 0.5], [root, 0.25]]})
    with pytest.raises(ValidationError):
        lattice_distribution(three, small_curve, surface, 2)
    sloped = VolSurface.from_limits(small_curve.tenor, (LimitVolatility(0.2), LimitVolatility(0.25, 0.01)))
    with pytest.raises(ValidationError):
        lattice_distribution(coin, small_curve, sloped, 2)


def test_lattice_matches_the_exact_tree(coin, small_curve):
    caplet = CapletSpec(2, (1.0,))
    lattice = refine_experiment(spec(coin, "lattice"), caplet, small_curve)
    exact = refine_experiment(spec(coin, "exact"), caplet, small_curve)
    assert [row.p for row in lattice] == [1, 2, 3]
    for a, b in zip(lattice, exact):
        assert (a.model, b.model) == ("discrete", "discrete")
        assert a.price == pytest.approx(b.price, rel=1e-12)
        assert a.benchmark == b.benchmark
        assert a.ks_stat == pytest.approx(b.ks_stat, abs=1e-12)
        assert a.seed is None


def test_first_level_is_the_base_model(coin, small_curve):
    caplet = CapletSpec(2, (1.0,))
    row = refine_experiment(spec(coin, "exact", levels=(1,)), caplet, small_curve)[0]
    surface = VolSurface.from_limits(small_curve.tenor, LIMITS)
    tree = enumerate_tree(coin, small_curve, surface, 2, rates_from=2)
    assert row.price == pytest.approx(caplet_price(tree, caplet, small_curve, 1.0).price, rel=1e-14)


def test_experiment_rejections(coin, gaussian, small_curve):
    caplet = CapletSpec(2, (1.0,))
    with pytest.raises(SizeError):
        refine_experiment(spec(coin, "exact", levels=(1, 20)), caplet, small_curve)
    with pytest.raises(ValidationError):
        refine_experiment(spec(coin, "lattice"), CapletSpec(1, (1.0,)), small_curve)
    with pytest.raises(ValidationError):
        refine_experiment(spec(gaussian, "exact"), caplet, small_curve)
    with pytest.raises(ValidationError):
        refine_experiment(spec(coin, "lattice"), CapletSpec(2, (1.0, 1.4)), small_curve)
    flat = MarketCurve((0.03, 0.03), small_curve.tenor)
    with pytest.raises(ValidationError):
        refine_experiment(spec(coin, "lattice"), caplet, flat)
    with pytest.raises(ValidationError):
        spec(coin, "sideways")


def test_lower_rates_are_benchmarked_by_the_bond_scheme(coin, small_curve):
    caplet = CapletSpec(1, (1.0,))
    calls = []
    rows = refine_experiment(
        spec(coin, "mc", levels=(1, 2), paths=2000, seeds=(1, 2)), caplet, small_curve, calls.append
    )
    assert calls == [1, 1]
    assert [(row.p, row.seed) for row in rows] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert all(row.model == "discrete" for row in rows)
    assert len({row.benchmark for row in rows}) == 4
    assert all(row.rel_error < 0.5 for row in rows)


def test_both_models_on_the_terminal_rate(coin, small_curve):
    caplet = CapletSpec(2, (1.0,))
    rows = refine_experiment(
        spec(coin, "lattice", levels=(1,), paths=2000, models=("discrete", "gz")), caplet, small_curve
    )
    assert [row.model for row in rows] == ["gz", "discrete"]
    assert rows[0].benchmark == rows[1].benchmark
    assert 0 < rows[0].ks_stat < 1


def test_lattice_error_shrinks_with_refinement(base_config):
    config = base_config.with_overrides(levels=(4, 64), mode="lattice")
    rows = refine_experiment(config.convergence_spec(), config.convergence_caplet(), config.market_curve())
    coarse, fine = rows
    assert fine.rel_error < coarse.rel_error
    assert fine.rel_error < 5e-3
    assert fine.ks_stat < coarse.ks_stat


def test_summarize():
    rows = [
        ConvergenceRow(1, "discrete", 1.0, 1.0, 0.04, 0.1, 1),
        ConvergenceRow(1, "discrete", 1.0, 1.0, 0.02, 0.1, 2),
        ConvergenceRow(1, "discrete", 1.0, 1.0, 0.03, 0.1, 3),
        ConvergenceRow(2, "discrete", 1.0, 1.0, 0.01, 0.1, 1),
        ConvergenceRow(1, "gz", 1.0, 1.0, 0.01, 0.1, 1),
        ConvergenceRow(2, "gz", 1.0, 1.0, 0.015, 0.1, 1),
    ]
    discrete, gz = summarize(rows)
    assert discrete.model == "discrete"
    assert discrete.levels == (1, 2)
    assert discrete.median_errors == pytest.approx((0.03, 0.01))
    assert discrete.non_increasing
    assert not gz.non_increasing
    assert summarize(rows, tolerance=0.01)[1].non_increasing
