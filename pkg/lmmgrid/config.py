"""
Run configuration: a JSON document parsed into frozen dataclasses.

Every validation failure raises ConfigError with the dotted path of the
offending entry, e.g. "vols.constant" or "pricing.strikes[3]".
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from lmmgrid.convergence import CONVERGENCE_MODELS, MODES, ConvergenceSpec
from lmmgrid.driver import make_driver
from lmmgrid.exceptions import ConfigError, ValidationError
from lmmgrid.market import LimitVolatility, MarketCurve, TenorStructure, VolSurface
from lmmgrid.pricing import CapletSpec
from lmmgrid.utils.io import read_json

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), "configs", "paper.json")


@dataclass(frozen=True)
class TenorConfig:
    t_star: float
    n: int
    p: int = 1


@dataclass(frozen=True)
class PricingConfig:
    fixing: int
    strikes: Tuple[float, ...]
    paths: int
    seed: int
    path_limit: int
    batch_size: int
    normalization: float = 1.0


@dataclass(frozen=True)
class ConvergenceConfig:
    levels: Tuple[int, ...]
    rate: int
    strike: float
    driver: str
    mode: str
    paths: int
    seeds: Tuple[int, ...]
    models: Tuple[str, ...]
    limit_vols: Optional[Tuple[Tuple[float, float], ...]] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"


@dataclass(frozen=True)
class RunConfig:
    tenor: TenorConfig
    curve: Tuple[float, ...]
    vols_kind: str
    vols: tuple
    drivers: Dict[str, dict]
    pricing: PricingConfig
    output: OutputConfig = OutputConfig()
    curve_as_printed: Optional[Tuple[float, ...]] = None
    convergence: Optional[ConvergenceConfig] = None

    def tenor_structure(self, p=None):
        return TenorStructure(self.tenor.t_star, self.tenor.n, self.tenor.p if p is None else p)

    def market_curve(self, as_printed=False, tenor=None):
        tenor = tenor or self.tenor_structure()
        if as_printed:
            if self.curve_as_printed is None:
                raise ConfigError("curve_as_printed", "not given in this config")
            return MarketCurve(self.curve_as_printed, tenor, self.pricing.normalization)
        return MarketCurve(self.curve, tenor, self.pricing.normalization)

    def vol_surface(self, tenor=None):
        tenor = tenor or self.tenor_structure()
        if self.vols_kind == "constant":
            return VolSurface.constant(tenor, self.vols)
        return VolSurface.from_matrix(tenor, self.vols)

    def driver(self, family):
        if family not in self.drivers:
            raise ConfigError(f"drivers.{family}", "missing")
        return make_driver(self.drivers[family])

    def caplet_spec(self):
        return CapletSpec(self.pricing.fixing, self.pricing.strikes)

    def limit_vols(self):
        """
        Limit volatility functions for the refinement experiment. Without an
        explicit block they are the constant per-rate vols.
        """
        if self.convergence is not None and self.convergence.limit_vols is not None:
            return tuple(LimitVolatility(level, slope) for level, slope in self.convergence.limit_vols)
        if self.vols_kind != "constant":
            raise ConfigError(
                "convergence.limit_vols", "required when vols are given as a matrix"
            )
        return tuple(LimitVolatility(level) for level in self.vols)

    def convergence_spec(self):
        if self.convergence is None:
            raise ConfigError("convergence", "missing")
        block = self.convergence
        return ConvergenceSpec(
            levels=block.levels,
            limit_lambdas=self.limit_vols(),
            driver=self.driver(block.driver),
            mode=block.mode,
            paths=block.paths,
            seeds=block.seeds,
            models=block.models,
            path_limit=self.pricing.path_limit,
            batch_size=self.pricing.batch_size,
        )

    def convergence_caplet(self):
        if self.convergence is None:
            raise ConfigError("convergence", "missing")
        return CapletSpec(self.convergence.rate, (self.convergence.strike,))

    def with_overrides(self, paths=None, seed=None, as_printed=False, levels=None, mode=None):
        """
        Applies command-line overrides, validating them like file values.
        Path count and seed apply to the convergence block too.
        """
        pricing = self.pricing
        if paths is not None:
            pricing = dataclasses.replace(pricing, paths=_positive_int(paths, "--paths"))
        if seed is not None:
            pricing = dataclasses.replace(pricing, seed=_seed(seed, "--seed"))
        curve = self.curve
        if as_printed:
            if self.curve_as_printed is None:
                raise ConfigError("curve_as_printed", "not given in this config")
            curve = self.curve_as_printed
        block = self.convergence
        if block is None and (levels is not None or mode is not None):
            raise ConfigError("convergence", "missing")
        if block is not None:
            if levels is not None:
                block = dataclasses.replace(block, levels=_levels(list(levels), "--levels"))
            if mode is not None:
                block = dataclasses.replace(block, mode=_choice(mode, MODES, "--mode"))
            if paths is not None:
                block = dataclasses.replace(block, paths=pricing.paths)
            if seed is not None:
                block = dataclasses.replace(block, seeds=(pricing.seed,))
        return dataclasses.replace(self, pricing=pricing, curve=curve, convergence=block)


def _mapping(raw, path):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    return raw


def _get(raw, key, path):
    if key not in raw:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    return raw[key]


def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    return value


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _positive_int(value, path):
    value = _integer(value, path)
    if value < 1:
        raise ConfigError(path, f"must be at least 1, got {value}")
    return value


def _seed(value, path):
    value = _integer(value, path)
    if value < 0:
        raise ConfigError(path, f"seeds must not be negative, got {value}")
    return value


def _list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list")
    return value


def _numbers(value, path, positive=False):
    return tuple(
        _number(item, f"{path}[{k}]", positive=positive) for k, item in enumerate(_list(value, path))
    )


def _choice(value, choices, path):
    if value not in choices:
        raise ConfigError(path, f"expected one of {', '.join(choices)}, got {value!r}")
    return value


def _levels(value, path):
    levels = tuple(_positive_int(item, f"{path}[{k}]") for k, item in enumerate(_list(value, path)))
    if list(levels) != sorted(set(levels)):
        raise ConfigError(path, "levels must be strictly increasing")
    return levels


def _parse_tenor(raw):
    raw = _mapping(_get(raw, "tenor", ""), "tenor")
    tenor = TenorConfig(
        t_star=_number(_get(raw, "t_star", "tenor"), "tenor.t_star", positive=True),
        n=_positive_int(_get(raw, "n", "tenor"), "tenor.n"),
        p=_positive_int(raw.get("p", 1), "tenor.p"),
    )
    if "delta" in raw:
        delta = _number(raw["delta"], "tenor.delta", positive=True)
        if abs(delta - tenor.t_star / (tenor.n + 1)) > 1e-12:
            raise ConfigError("tenor.delta", f"must equal t_star / (n + 1), got {delta}")
    return tenor


def _parse_vols(raw, tenor):
    raw = _mapping(_get(raw, "vols", ""), "vols")
    kinds = [key for key in ("constant", "matrix") if key in raw]
    if len(kinds) != 1:
        raise ConfigError("vols", "give exactly one of constant or matrix")
    kind = kinds[0]
    path = f"vols.{kind}"
    if kind == "constant":
        vols = _numbers(raw[kind], path)
    else:
        vols = tuple(
            _numbers(row, f"{path}[{i}]")
            for i, row in enumerate(_list(raw[kind], path))
        )
    try:
        if kind == "constant":
            VolSurface.constant(tenor, vols)
        else:
            VolSurface.from_matrix(tenor, vols)
    except ValidationError as e:
        raise ConfigError(path, str(e))
    return kind, vols


def _parse_drivers(raw):
    raw = _mapping(_get(raw, "drivers", ""), "drivers")
    drivers = {}
    for family, expected in (("atomic", "atomic"), ("gaussian", "gaussian")):
        if family not in raw:
            continue
        spec = dict(_mapping(raw[family], f"drivers.{family}"))
        try:
            driver = make_driver(spec)
        except ValidationError as e:
            raise ConfigError(f"drivers.{family}", str(e))
        if driver.kind != expected:
            raise ConfigError(f"drivers.{family}", f"expected a {expected} law, got {driver.kind}")
        drivers[family] = spec
    unknown = sorted(set(raw) - set(drivers))
    if unknown:
        raise ConfigError(f"drivers.{unknown[0]}", "unknown driver family")
    if not drivers:
        raise ConfigError("drivers", "need at least one driver")
    return drivers


def _parse_pricing(raw, tenor):
    raw = _mapping(_get(raw, "pricing", ""), "pricing")
    fixing = _integer(_get(raw, "fixing", "pricing"), "pricing.fixing")
    if not 1 <= fixing <= tenor.n:
        raise ConfigError("pricing.fixing", f"must lie in 1..{tenor.n}, got {fixing}")
    return PricingConfig(
        fixing=fixing,
        strikes=_numbers(_get(raw, "strikes", "pricing"), "pricing.strikes", positive=True),
        paths=_positive_int(_get(raw, "paths", "pricing"), "pricing.paths"),
        seed=_seed(_get(raw, "seed", "pricing"), "pricing.seed"),
        path_limit=_positive_int(raw.get("path_limit", 2 ** 16), "pricing.path_limit"),
        batch_size=_positive_int(raw.get("batch_size", 50_000), "pricing.batch_size"),
        normalization=_number(
            raw.get("normalization", 1.0), "pricing.normalization", positive=True
        ),
    )


def _parse_convergence(raw, tenor, drivers):
    if raw.get("convergence") is None:
        return None
    raw = _mapping(raw["convergence"], "convergence")
    rate = _integer(_get(raw, "rate", "convergence"), "convergence.rate")
    if not 1 <= rate <= tenor.n:
        raise ConfigError("convergence.rate", f"must lie in 1..{tenor.n}, got {rate}")
    driver = _choice(_get(raw, "driver", "convergence"), tuple(drivers), "convergence.driver")
    limit_vols = None
    if raw.get("limit_vols") is not None:
        rows = _list(raw["limit_vols"], "convergence.limit_vols")
        if len(rows) != tenor.n:
            raise ConfigError(
                "convergence.limit_vols", f"need {tenor.n} [level, slope] pairs, got {len(rows)}"
            )
        pairs = []
        for k, row in enumerate(rows):
            path = f"convergence.limit_vols[{k}]"
            values = _numbers(row, path)
            if len(values) != 2:
                raise ConfigError(path, "expected [level, slope]")
            try:
                LimitVolatility(*values).check(tenor.t_star)
            except ValidationError as e:
                raise ConfigError(path, str(e))
            pairs.append(values)
        limit_vols = tuple(pairs)
    models = tuple(
        _choice(model, CONVERGENCE_MODELS, f"convergence.models[{k}]")
        for k, model in enumerate(_list(raw.get("models", ["discrete"]), "convergence.models"))
    )
    return ConvergenceConfig(
        levels=_levels(_get(raw, "levels", "convergence"), "convergence.levels"),
        rate=rate,
        strike=_number(raw.get("strike", 1.0), "convergence.strike", positive=True),
        driver=driver,
        mode=_choice(raw.get("mode", "lattice"), MODES, "convergence.mode"),
        paths=_positive_int(raw.get("paths", 100_000), "convergence.paths"),
        seeds=tuple(
            _seed(seed, f"convergence.seeds[{k}]")
            for k, seed in enumerate(_list(raw.get("seeds", [1]), "convergence.seeds"))
        ),
        models=models,
        limit_vols=limit_vols,
    )


def parse_config(raw):
    """
    Validates a raw config mapping and returns a RunConfig.
    """
    raw = _mapping(raw, "config")
    tenor = _parse_tenor(raw)
    grid = TenorStructure(tenor.t_star, tenor.n, tenor.p)
    curve = _numbers(_get(raw, "curve", ""), "curve")
    pricing = _parse_pricing(raw, grid)
    curves = {"curve": curve}
    if raw.get("curve_as_printed") is not None:
        curves["curve_as_printed"] = _numbers(raw["curve_as_printed"], "curve_as_printed")
    for name, values in curves.items():
        try:
            MarketCurve(values, grid, pricing.normalization)
        except ValidationError as e:
            raise ConfigError(name, str(e))
    vols_kind, vols = _parse_vols(raw, grid)
    drivers = _parse_drivers(raw)
    output = _mapping(raw.get("output", {}), "output")
    directory = output.get("directory", "results")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "expected a non-empty path")
    config = RunConfig(
        tenor=tenor,
        curve=curve,
        vols_kind=vols_kind,
        vols=vols,
        drivers=drivers,
        pricing=pricing,
        output=OutputConfig(directory),
        curve_as_printed=curves.get("curve_as_printed"),
        convergence=_parse_convergence(raw, grid, drivers),
    )
    if config.convergence is not None:
        config.limit_vols()
    return config


def config_to_dict(config):
    """
    Serializes a RunConfig so that parse_config(config_to_dict(c)) == c.
    """
    raw = {
        "tenor": dataclasses.asdict(config.tenor),
        "curve": list(config.curve),
        "vols": {
            config.vols_kind: [list(row) for row in config.vols]
            if config.vols_kind == "matrix"
            else list(config.vols)
        },
        "drivers": {family: dict(spec) for family, spec in config.drivers.items()},
        "pricing": dict(dataclasses.asdict(config.pricing), strikes=list(config.pricing.strikes)),
        "output": dataclasses.asdict(config.output),
    }
    if config.curve_as_printed is not None:
        raw["curve_as_printed"] = list(config.curve_as_printed)
    if config.convergence is not None:
        block = config.convergence
        raw["convergence"] = {
            "levels": list(block.levels),
            "rate": block.rate,
            "strike": block.strike,
            "driver": block.driver,
            "mode": block.mode,
            "paths": block.paths,
            "seeds": list(block.seeds),
            "models": list(block.models),
            "limit_vols": None
            if block.limit_vols is None
            else [list(pair) for pair in block.limit_vols],
        }
    return raw


def config_hash(config):
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path):
    try:
        raw = read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError("config", f"cannot read {path}: {e}")
    return parse_config(raw)


def default_config():
    return load_config(DEFAULT_CONFIG)
