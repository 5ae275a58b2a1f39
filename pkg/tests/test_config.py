import copy
import json
import os

import pytest

from lmmgrid.config import (
    DEFAULT_CONFIG,
    config_hash,
    config_to_dict,
    default_config,
    load_config,
    parse_config,
)
from lmmgrid.constants import BASE_CURVE, BASE_CURVE_AS_PRINTED, BASE_STRIKES
from lmmgrid.exceptions import ConfigError
from lmmgrid.market import LimitVolatility


@pytest.fixture
def raw(base_config):
    return config_to_dict(base_config)


def broken(raw, change):
    raw = copy.deepcopy(raw)
    change(raw)
    return raw


def test_default_config(base_config):
    assert base_config.tenor.n == 10
    assert base_config.curve == BASE_CURVE
    assert base_config.pricing.strikes == BASE_STRIKES
    assert base_config.caplet_spec().fixing == 5
    assert base_config.tenor_structure().delta == 1.0
    assert base_config.market_curve().libor(2) == 0.023
    assert base_config.market_curve(as_printed=True).libor(2) == 0.23
    assert base_config.driver("atomic").values == pytest.approx((1.0, -1.0))


def test_packaged_defaults_file():
    assert os.path.basename(DEFAULT_CONFIG) == "paper.json"
    assert os.path.exists(DEFAULT_CONFIG)
    assert load_config(DEFAULT_CONFIG) == default_config()


def test_round_trip(base_config, raw):
    assert parse_config(raw) == base_config
    assert parse_config(json.loads(json.dumps(raw))) == base_config


def test_hash_is_stable(base_config, raw):
    assert config_hash(base_config) == config_hash(default_config())
    assert len(config_hash(base_config)) == 64
    changed = parse_config(broken(raw, lambda r: r["pricing"].update(seed=7)))
    assert config_hash(changed) != config_hash(base_config)


@pytest.mark.parametrize(
    "change, field",
    [
        (lambda r: r["vols"]["constant"].pop(), "vols.constant"),
        (lambda r: r.pop("curve"), "curve"),
        (lambda r: r["curve"].__setitem__(3, -0.01), "curve"),
        (lambda r: r["pricing"]["strikes"].__setitem__(3, 0), "pricing.strikes[3]"),
        (lambda r: r["pricing"].update(fixing=11), "pricing.fixing"),
        (lambda r: r["pricing"].update(paths=0), "pricing.paths"),
        (lambda r: r["pricing"].update(seed=True), "pricing.seed"),
        (lambda r: r["tenor"].update(delta=2.0), "tenor.delta"),
        (lambda r: r["drivers"]["atomic"].update(p=1.5), "drivers.atomic"),
        (lambda r: r["drivers"].update(levy={"kind": "gaussian"}), "drivers.levy"),
        (lambda r: r["convergence"].update(levels=[1, 4, 2]), "convergence.levels"),
        (lambda r: r["convergence"].update(mode="sideways"), "convergence.mode"),
        (lambda r: r["convergence"].update(limit_vols=[[0.2, 0.0]]), "convergence.limit_vols"),
        (lambda r: r["vols"].update(matrix=[[0.2] * 10]), "vols"),
    ],
)
def test_config_errors_name_the_field(raw, change, field):
    with pytest.raises(ConfigError) as info:
        parse_config(broken(raw, change))
    assert info.value.field == field


def test_missing_vol_names_the_rate(raw):
    with pytest.raises(ConfigError, match="rate 10"):
        parse_config(broken(raw, lambda r: r["vols"]["constant"].pop()))


def test_matrix_vols_need_limits(raw):
    matrix = broken(raw, lambda r: r.update(vols={"matrix": [[0.2] * 10] * 11}))
    config = parse_config(broken(matrix, lambda r: r.pop("convergence")))
    assert config.vol_surface().row(3)[0] == 0.2
    with pytest.raises(ConfigError) as info:
        parse_config(matrix)
    assert info.value.field == "convergence.limit_vols"
    limits = [[0.2, 0.0]] * 9 + [[0.16, -0.001]]
    config = parse_config(broken(matrix, lambda r: r["convergence"].update(limit_vols=limits)))
    assert config.limit_vols()[-1] == LimitVolatility(0.16, -0.001)
    assert parse_config(config_to_dict(config)) == config


def test_overrides(base_config):
    config = base_config.with_overrides(paths=1000, seed=3, as_printed=True, levels=[1, 2], mode="exact")
    assert config.pricing.paths == 1000
    assert config.pricing.seed == 3
    assert config.curve == BASE_CURVE_AS_PRINTED
    assert config.convergence.levels == (1, 2)
    assert config.convergence.mode == "exact"
    assert config.convergence.seeds == (3,)
    assert config.convergence_spec().paths == 1000
    assert base_config.with_overrides() == base_config
    for kwargs, field in (
        ({"paths": 0}, "--paths"),
        ({"seed": -1}, "--seed"),
        ({"levels": [2, 1]}, "--levels"),
        ({"mode": "sideways"}, "--mode"),
    ):
        with pytest.raises(ConfigError) as info:
            base_config.with_overrides(**kwargs)
        assert info.value.field == field


def test_convergence_block(base_config):
    spec = base_config.convergence_spec()
    assert spec.levels == (1, 2, 4, 8, 16, 32, 64)
    assert spec.mode == "lattice"
    assert spec.limit_lambdas[-1] == LimitVolatility(0.16)
    assert base_config.convergence_caplet().fixing == 10


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(str(tmp_path / "missing.json"))
    assert info.value.field == "config"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
