"""
Shared fixtures: catalog surfaces sampled on canonical grids.
"""

import pytest

from config.settings import get_settings
from models.config_models import EnergyModel, SurfaceSpec
from services.chart import default_grid, sample_surface
from services.diffgeo import analytic_bundle, geometry_bundle

# (kind, params, n1, n2) at the moderate resolution used across the suite
CATALOG = [
    ("sphere_band", {"R": 1.0, "theta0": 0.2}, 64, 65),
    ("cylinder", {"rho": 1.0, "L": 2.0}, 64, 33),
    ("catenoid", {"c": 1.0, "L": 2.0}, 64, 65),
    ("torus", {}, 64, 64),
    ("ellipsoid_band", {"a": 1.2, "b": 1.0, "c": 0.8, "theta0": 0.3}, 64, 65),
    ("graph", {"amplitude": 0.1}, 33, 33),
]

PRESETS = [
    EnergyModel.soap_film(0.7),
    EnergyModel.willmore(1.3),
    EnergyModel.helfrich(1.0, 0.5),
]


@pytest.fixture(autouse=True)
def _testing_environment(monkeypatch):
    monkeypatch.setenv("MEMBRANE_ENVIRONMENT", "testing")
    monkeypatch.delenv("MEMBRANE_THREADS", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def make_surface():
    """Factory: (kind, n1, n2, **params) -> (spec, grid, embedding)."""

    def build(kind, n1, n2, **params):
        spec = SurfaceSpec(kind=kind, params=params)
        grid = default_grid(spec, n1, n2)
        return spec, grid, sample_surface(spec, grid)

    return build


@pytest.fixture
def make_bundle(make_surface):
    """Factory: (kind, n1, n2, analytic=False, **params) -> (embedding, bundle)."""

    def build(kind, n1, n2, analytic=False, **params):
        spec, grid, emb = make_surface(kind, n1, n2, **params)
        bundle = analytic_bundle(spec, grid) if analytic else geometry_bundle(emb)
        return emb, bundle

    return build


@pytest.fixture(params=CATALOG, ids=[entry[0] for entry in CATALOG])
def catalog_bundle(request, make_bundle):
    kind, params, n1, n2 = request.param
    return make_bundle(kind, n1, n2, **params)


@pytest.fixture(params=PRESETS, ids=[model.name for model in PRESETS])
def preset_model(request):
    return request.param
