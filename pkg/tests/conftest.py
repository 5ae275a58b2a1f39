import pytest

from lmmgrid.config import default_config
from lmmgrid.constants import BASE_CURVE, BASE_VOLS
from lmmgrid.driver import make_driver
from lmmgrid.market import MarketCurve, TenorStructure, VolSurface


@pytest.fixture
def base_tenor():
    return TenorStructure(11.0, 10, 1)


@pytest.fixture
def base_curve(base_tenor):
    return MarketCurve(BASE_CURVE, base_tenor)


@pytest.fixture
def base_surface(base_tenor):
    return VolSurface.constant(base_tenor, BASE_VOLS)


@pytest.fixture
def coin():
    return make_driver({"kind": "bernoulli", "p": 0.5})


@pytest.fixture
def gaussian():
    return make_driver({"kind": "gaussian", "variance": 1.0})


@pytest.fixture
def base_config():
    return default_config()
