import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.config_models import BoundaryCondition, GridConfig, SurfaceSpec
from services.chart import (
    EmbeddingField,
    analytic_frame,
    default_grid,
    grid_from_config,
    make_grid,
    sample_surface,
    surface_point,
)
from services.diffgeo import gradient
from utils.errors import ConfigurationError

P = BoundaryCondition.PERIODIC
C = BoundaryCondition.CLAMPED


class TestGrid:
    def test_spacing_periodic_and_clamped(self):
        grid = make_grid((0.0, 2 * math.pi, -1.0, 1.0), 16, 9, P, C)
        assert grid.h1 == pytest.approx(2 * math.pi / 16)
        assert grid.h2 == pytest.approx(2.0 / 8)
        assert grid.u2[-1] == pytest.approx(1.0)
        assert grid.u1[-1] < 2 * math.pi

    def test_too_few_nodes(self):
        with pytest.raises(ConfigurationError, match="at least 8"):
            make_grid((0.0, 1.0, 0.0, 1.0), 7, 16, C, C)

    def test_degenerate_domain(self):
        with pytest.raises(ConfigurationError):
            make_grid((0.0, 0.0, 0.0, 1.0), 8, 8, C, C)

    def test_quadrature_weights_sum_to_parameter_area(self):
        grid = make_grid((0.0, 2 * math.pi, -0.5, 0.5), 32, 17, P, C)
        assert np.sum(grid.quadrature_weights()) == pytest.approx(2 * math.pi)
        edge = grid.quadrature_weights()[:, 0]
        assert np.allclose(edge, 0.5 * grid.h1 * grid.h2)

    def test_grid_from_config_uses_kind_defaults(self):
        spec = SurfaceSpec(kind="cylinder", params={"L": 2.0}, grid={"n1": 32, "n2": 17})
        grid = grid_from_config(spec)
        assert grid.bcs == (P, C)
        assert grid.domain == pytest.approx((0.0, 2 * math.pi, -1.0, 1.0))

    def test_grid_from_config_requires_grid(self):
        with pytest.raises(ConfigurationError, match="surface.grid"):
            grid_from_config(SurfaceSpec(kind="torus"))


class TestSurfaceSpec:
    def test_defaults_resolved(self):
        spec = SurfaceSpec(kind="torus")
        assert spec.param("R") == pytest.approx(math.sqrt(2.0))
        assert spec.param("r") == 1.0

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValidationError):
            SurfaceSpec(kind="cylinder", params={"radius": 1.0})

    @pytest.mark.parametrize("params", [{"rho": 0.0}, {"rho": -1.0}, {"L": float("inf")}])
    def test_bad_lengths_rejected(self, params):
        with pytest.raises(ValidationError):
            SurfaceSpec(kind="cylinder", params=params)

    def test_band_margin_range(self):
        with pytest.raises(ValidationError):
            SurfaceSpec(kind="sphere_band", params={"theta0": 2.0})


class TestSampling:
    def test_sphere_equator_point(self):
        spec = SurfaceSpec(kind="sphere_band", params={"R": 2.0})
        grid = default_grid(spec, 16, 9)
        emb = sample_surface(spec, grid)
        np.testing.assert_allclose(emb.X[0, 4], [2.0, 0.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(emb.X, axis=-1), 2.0, rtol=1e-14)

    def test_sphere_lower_pole_side_first(self):
        spec = SurfaceSpec(kind="sphere_band")
        assert surface_point(spec, 0.0, spec.param("theta0"))[2] < 0.0

    def test_catenoid_profile(self):
        spec = SurfaceSpec(kind="catenoid", params={"c": 0.8, "L": 1.0})
        emb = sample_surface(spec, default_grid(spec, 16, 9))
        radius = np.hypot(emb.X[..., 0], emb.X[..., 1])
        np.testing.assert_allclose(radius, 0.8 * np.cosh(emb.X[..., 2] / 0.8), rtol=1e-14)

    def test_flat_graph(self):
        spec = SurfaceSpec(kind="graph")
        emb = sample_surface(spec, default_grid(spec, 9, 9))
        assert np.all(emb.X[..., 2] == 0.0)

    def test_torus_needs_two_periodic_directions(self):
        spec = SurfaceSpec(kind="torus")
        grid = make_grid((0.0, 2 * math.pi, 0.0, 2 * math.pi), 16, 16, P, C)
        with pytest.raises(ConfigurationError, match="periodic x periodic"):
            sample_surface(spec, grid)

    def test_periodic_direction_must_span_full_turn(self):
        spec = SurfaceSpec(kind="cylinder")
        grid = make_grid((0.0, math.pi, -0.5, 0.5), 16, 9, P, C)
        with pytest.raises(ConfigurationError, match="2\\*pi"):
            sample_surface(spec, grid)

    def test_band_must_stay_inside_margin(self):
        spec = SurfaceSpec(kind="sphere_band", params={"theta0": 0.3})
        grid = make_grid((0.0, 2 * math.pi, 0.1, math.pi - 0.1), 16, 9, P, C)
        with pytest.raises(ConfigurationError):
            sample_surface(spec, grid)

    def test_analytic_frame_matches_differences(self):
        spec = SurfaceSpec(kind="torus")
        grid = default_grid(spec, 64, 64)
        X, X_a, X_ab = analytic_frame(spec, grid)
        np.testing.assert_allclose(gradient(X, grid, stack_axis=-2), X_a, atol=5e-5)
        np.testing.assert_array_equal(X_ab[..., 0, 1, :], X_ab[..., 1, 0, :])

    @pytest.mark.parametrize(
        "kind, params, n1, n2",
        [
            ("torus", {}, 16, 16),
            ("ellipsoid_band", {"a": 1.2, "c": 0.8, "theta0": 0.3}, 16, 17),
            ("graph", {"amplitude": 0.1}, 9, 9),
        ],
    )
    def test_doubled_resolution_reproduces_coarse_nodes(self, kind, params, n1, n2):
        spec = SurfaceSpec(kind=kind, params=params)
        coarse_grid = default_grid(spec, n1, n2)
        f1, f2 = (2 * n if coarse_grid.is_periodic(axis) else 2 * n - 1 for axis, n in enumerate((n1, n2)))
        fine_grid = default_grid(spec, f1, f2)
        np.testing.assert_array_equal(fine_grid.u1[::2], coarse_grid.u1)
        np.testing.assert_array_equal(fine_grid.u2[::2], coarse_grid.u2)

        coarse = sample_surface(spec, coarse_grid)
        fine = sample_surface(spec, fine_grid)
        np.testing.assert_array_equal(fine.X[::2, ::2], coarse.X)


class TestEmbeddingField:
    def test_shape_mismatch(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 8, 8, C, C)
        with pytest.raises(ConfigurationError, match="does not match"):
            EmbeddingField(grid, np.zeros((8, 9, 3)))

    def test_non_finite_positions(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 8, 8, C, C)
        X = np.zeros((8, 8, 3))
        X[3, 3, 0] = np.nan
        with pytest.raises(ConfigurationError, match="non-finite"):
            EmbeddingField(grid, X)

    def test_scaled(self):
        spec = SurfaceSpec(kind="cylinder")
        emb = sample_surface(spec, default_grid(spec, 16, 9))
        np.testing.assert_array_equal(emb.scaled(2.0).X, 2.0 * emb.X)

    def test_grid_config_forbids_unknown_keys(self):
        with pytest.raises(ValidationError):
            GridConfig(n1=8, n2=8, spacing=0.1)
