import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmmgrid.constants import BASE_STRIKES, REFERENCE_SMILES
from lmmgrid.exceptions import (
    DomainError,
    HorizonError,
    NoSolutionError,
    RateIndexError,
    ValidationError,
)
from lmmgrid.market import MarketCurve
from lmmgrid.models import enumerate_tree, simulate_paths
from lmmgrid.pricing import (
    CapletSpec,
    SmilePoint,
    black_caplet,
    black_vega,
    build_smile,
    caplet_price,
    compare_to_reference,
    implied_vol,
    smile_from_ensemble,
    smile_ordering,
)


@pytest.fixture
def base_tree(coin, base_curve, base_surface):
    return enumerate_tree(coin, base_curve, base_surface, 5)


def test_caplet_spec_validation(base_tenor):
    assert CapletSpec(5, (1.0,)).payment == 6
    with pytest.raises(ValidationError):
        CapletSpec(11, (1.0,)).validate(base_tenor)
    with pytest.raises(ValidationError):
        CapletSpec(5, (0.0,)).validate(base_tenor)


def test_zero_strike_is_the_forward(base_tree, base_curve):
    spec = CapletSpec(5, BASE_STRIKES)
    price, std_err = caplet_price(base_tree, spec, base_curve, 0.0)
    assert std_err == 0.0
    forward = price / (base_curve.bond(6) * base_curve.delta)
    assert forward == pytest.approx(base_curve.libor(5), rel=1e-12)


def test_far_strike_is_worthless(base_tree, base_curve):
    price, _ = caplet_price(base_tree, CapletSpec(5, (100.0,)), base_curve, 100.0)
    assert price == 0.0


def test_prices_decrease_in_strike(base_tree, base_curve):
    spec = CapletSpec(5, BASE_STRIKES)
    prices = [caplet_price(base_tree, spec, base_curve, k).price for k in BASE_STRIKES]
    assert all(later <= earlier for earlier, later in zip(prices, prices[1:]))


def test_horizon_and_rate_checks(coin, base_curve, base_surface):
    short = enumerate_tree(coin, base_curve, base_surface, 4)
    with pytest.raises(HorizonError):
        caplet_price(short, CapletSpec(5, (1.0,)), base_curve, 1.0)
    partial = enumerate_tree(coin, base_curve, base_surface, 5, rates_from=6)
    with pytest.raises(RateIndexError):
        caplet_price(partial, CapletSpec(5, (1.0,)), base_curve, 1.0)


def test_black_limits():
    assert black_caplet(0.03, 0.02, 1e-9, 5.0, 0.9, 1.0) == pytest.approx(0.9 * 0.01, rel=1e-9)
    assert black_caplet(0.03, 0.04, 1e-9, 5.0, 0.9, 1.0) == pytest.approx(0.0, abs=1e-15)
    atm = black_caplet(0.03, 0.03, 0.01, 4.0, 0.9, 1.0)
    assert atm == pytest.approx(0.9 * 0.03 * 0.01 * 2.0 * 0.3989, rel=1e-3)
    assert black_caplet(0.03, 0.0, 0.2, 4.0, 0.9, 0.5) == pytest.approx(0.9 * 0.5 * 0.03)
    assert black_caplet(0.03, 0.03, 0.0, 4.0, 0.9, 1.0) == 0.0
    with pytest.raises(DomainError):
        black_caplet(0.03, 0.02, 0.0, 4.0, 0.9, 1.0)


@given(st.lists(st.floats(0.01, 2.0), min_size=2, max_size=10, unique=True))
def test_black_increases_with_vol(vols):
    prices = [black_caplet(0.03, 0.036, sigma, 5.0, 0.85, 1.0) for sigma in sorted(vols)]
    assert all(later > earlier for earlier, later in zip(prices, prices[1:]))


@given(st.floats(0.05, 2.0), st.floats(0.7, 1.4))
def test_implied_vol_round_trip(sigma, moneyness):
    price = black_caplet(0.03, 0.03 * moneyness, sigma, 5.0, 0.85, 1.0)
    assert implied_vol(price, 0.03, 0.03 * moneyness, 5.0, 0.85, 1.0) == pytest.approx(sigma, abs=1e-8)


@given(st.floats(0.05, 0.8), st.floats(0.5, 2.0))
def test_vega_matches_finite_difference(sigma, moneyness):
    args = (0.03, moneyness * 0.03)
    step = 1e-6
    up = black_caplet(*args, sigma + step, 5.0, 0.85, 1.0)
    down = black_caplet(*args, sigma - step, 5.0, 0.85, 1.0)
    vega = black_vega(*args, sigma, 5.0, 0.85, 1.0)
    assert vega == pytest.approx((up - down) / (2 * step), rel=1e-5, abs=1e-9)


def test_implied_vol_outside_bracket():
    intrinsic = 0.85 * (0.03 - 0.02)
    with pytest.raises(NoSolutionError):
        implied_vol(intrinsic, 0.03, 0.02, 5.0, 0.85, 1.0)
    with pytest.raises(NoSolutionError):
        implied_vol(0.85 * 0.03, 0.03, 0.02, 5.0, 0.85, 1.0)


def test_reference_vol_round_trip(base_curve):
    forward = 0.0292
    args = (forward, 0.6 * forward, 5.0, base_curve.bond(6), 1.0)
    price = black_caplet(args[0], args[1], 0.542, *args[2:])
    assert implied_vol(price, *args) == pytest.approx(0.542, abs=1e-8)


def test_exact_smile(base_tree, base_curve):
    spec = CapletSpec(5, BASE_STRIKES)
    points = smile_from_ensemble(base_tree, spec, base_curve)
    assert [p.strike_mult for p in points] == list(BASE_STRIKES)
    assert all(p.std_err == 0.0 and p.price >= 0 for p in points)
    # A 32-leaf tree scatters around the 0.26 input vol of rate 5
    finite = [p.implied_vol for p in points if not math.isnan(p.implied_vol)]
    assert len(finite) >= 6
    assert all(abs(vol - 0.26) < 0.04 for vol in finite)
    # The highest leaf of the five-step tree sits below 3.4 L(0, T_5)
    assert math.isnan(points[-1].implied_vol)
    assert points[-1].price == 0.0


def test_normalization_leaves_vols_unchanged(coin, base_curve, base_surface):
    spec = CapletSpec(5, (0.6, 1.0, 1.4))
    scaled_curve = MarketCurve(base_curve.initial_libors, base_curve.tenor, normalization=7.5)
    base = smile_from_ensemble(enumerate_tree(coin, base_curve, base_surface, 5), spec, base_curve)
    scaled = smile_from_ensemble(
        enumerate_tree(coin, scaled_curve, base_surface, 5), spec, scaled_curve
    )
    for a, b in zip(base, scaled):
        assert b.price == pytest.approx(7.5 * a.price, rel=1e-12)
        assert b.implied_vol == pytest.approx(a.implied_vol, abs=1e-10)


def test_monte_carlo_smile_has_errors(gaussian, base_curve, base_surface):
    spec = CapletSpec(5, (1.0, 1.4))
    ensemble = simulate_paths(
        gaussian, base_curve, base_surface, 5, 2000, seed=4, rates_from=5, keep_trajectory=False
    )
    points = smile_from_ensemble(ensemble, spec, base_curve)
    assert all(p.std_err > 0 for p in points)
    forward = base_curve.libor(5)
    for p in points:
        vega = black_vega(forward, p.strike_mult * forward, p.implied_vol, 5.0, base_curve.bond(6), 1.0)
        assert p.vol_std_err == pytest.approx(p.std_err / vega, rel=1e-12)


def test_build_smile_exact_from_config(base_config):
    points = build_smile("bernoulli-exact", base_config.caplet_spec(), base_config)
    assert len(points) == 8
    rows = compare_to_reference(points, REFERENCE_SMILES["bernoulli-exact"], 0.02)
    assert len(rows) == 8
    assert rows[0].reference == 0.542
    with pytest.raises(ValidationError):
        build_smile("bernoulli-fancy", base_config.caplet_spec(), base_config)


def test_build_smile_is_seed_independent_for_trees(base_config):
    spec = base_config.caplet_spec()
    first = build_smile("bernoulli-exact", spec, base_config)
    second = build_smile("bernoulli-exact", spec, base_config.with_overrides(seed=99))
    assert first == second


def test_compare_to_reference_flags_nan():
    points = [SmilePoint(1.0, 0.1, 0.3), SmilePoint(2.0, 0.0, math.nan)]
    rows = compare_to_reference(points, (0.31, 0.25), 0.02)
    assert rows[0].within
    assert rows[0].deviation == pytest.approx(-0.01)
    assert not rows[1].within
    with pytest.raises(ValidationError):
        compare_to_reference(points, (0.3,), 0.02)


def test_smile_ordering():
    def smile(vols):
        return [SmilePoint(k, 0.1, v) for k, v in zip((0.6, 1.0, 1.4), vols)]

    checks = smile_ordering(
        {
            "bernoulli-exact": smile((0.5, 0.4, 0.35)),
            "lognormal-mc": smile((0.45, 0.3, 0.2)),
            "gz-mc": smile((0.4, 0.3, 0.25)),
        }
    )
    assert [c.passed for c in checks] == [True, True, True, True]
    checks = smile_ordering(
        {"bernoulli-exact": smile((0.5, 0.2, math.nan)), "gz-mc": smile((0.4, 0.3, 0.25))}
    )
    assert len(checks) == 1
    assert not checks[0].passed
    assert checks[0].strikes == 2


def test_lognormal_smile_is_flat_at_the_input_vol(gaussian, base_curve, base_surface):
    spec = CapletSpec(5, (0.6, 1.0, 1.4, 1.8))
    ensemble = simulate_paths(
        gaussian, base_curve, base_surface, 5, 20_000, seed=11, rates_from=5, keep_trajectory=False
    )
    for point in smile_from_ensemble(ensemble, spec, base_curve):
        assert abs(point.implied_vol - 0.26) <= 0.005 + 4 * point.vol_std_err


@pytest.mark.slow
@pytest.mark.parametrize("model, band", [("lognormal-mc", 0.005), ("gz-mc", 0.01)])
def test_monte_carlo_smiles_centre_on_the_input_vol(base_config, model, band):
    config = base_config.with_overrides(paths=100_000)
    points = build_smile(model, config.caplet_spec(), config)
    finite = [p for p in points if not math.isnan(p.implied_vol)]
    assert len(finite) >= 6
    for point in finite:
        assert abs(point.implied_vol - 0.26) <= band + 4 * point.vol_std_err
