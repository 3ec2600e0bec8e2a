import math

import numpy as np
import pytest

from models.config_models import BoundaryCondition
from services.chart import make_grid
from services.diffgeo import (
    audit_identities,
    cov_div_sym2,
    gaussian_curvature,
    geometry_bundle,
    identity_residuals,
    interior_mask,
    laplace_beltrami,
    partial,
)
from utils.errors import ImmersionError

P = BoundaryCondition.PERIODIC
C = BoundaryCondition.CLAMPED

CONVERGING = ("weingarten", "gauss", "gauss_codazzi", "codazzi_mainardi", "sigma_model")

# residuals below this are rounding noise and carry no truncation order
ROUND_OFF = 1e-11


class TestPartial:
    @pytest.mark.parametrize("bcs", [(P, P), (P, C), (C, C)])
    def test_constant_maps_to_exact_zero(self, bcs):
        grid = make_grid((0.0, 2 * math.pi, 0.0, 2 * math.pi), 16, 16, *bcs)
        field = np.full(grid.shape + (3,), 0.1234567)
        for axis in range(2):
            assert np.all(partial(field, grid, axis) == 0.0)

    def test_quartic_exact_on_clamped_axis(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 11, 11, C, C)
        U1, _ = grid.mesh()
        f = U1 ** 4 - 2.0 * U1 ** 2 + U1
        np.testing.assert_allclose(partial(f, grid, 0), 4.0 * U1 ** 3 - 4.0 * U1 + 1.0, atol=1e-11)

    def test_periodic_fourth_order(self):
        errors = []
        for n in (32, 64):
            grid = make_grid((0.0, 2 * math.pi, 0.0, 2 * math.pi), n, n, P, P)
            U1, U2 = grid.mesh()
            d = partial(np.sin(2 * U1) * np.cos(U2), grid, 0)
            errors.append(np.max(np.abs(d - 2 * np.cos(2 * U1) * np.cos(U2))))
        assert 14.0 < errors[0] / errors[1] < 18.0


class TestBundle:
    def test_cylinder_curvature(self, make_bundle):
        _, bundle = make_bundle("cylinder", 64, 33, rho=2.0, L=1.0)
        np.testing.assert_allclose(bundle.mean_trace, 0.5, rtol=1e-4)
        np.testing.assert_allclose(bundle.extrinsic_gaussian, 0.0, atol=1e-6)

    def test_sphere_outward_normal(self, make_bundle):
        emb, bundle = make_bundle("sphere_band", 32, 33)
        np.testing.assert_allclose(bundle.n, emb.X, atol=5e-4)

    def test_analytic_sphere(self, make_bundle):
        _, bundle = make_bundle("sphere_band", 32, 33, analytic=True, R=1.0)
        np.testing.assert_allclose(bundle.K, bundle.g, atol=1e-14)
        np.testing.assert_allclose(bundle.mean_trace, 2.0, rtol=1e-13)
        np.testing.assert_allclose(bundle.mean_curvature, 1.0, rtol=1e-13)
        assert bundle.max_asymmetry <= 1e-14

    def test_metric_inverse_symmetric(self, catalog_bundle):
        _, bundle = catalog_bundle
        np.testing.assert_array_equal(bundle.g_inv[..., 0, 1], bundle.g_inv[..., 1, 0])
        np.testing.assert_array_equal(bundle.K[..., 0, 1], bundle.K[..., 1, 0])
        identity = np.einsum("...ab,...bc->...ac", bundle.g, bundle.g_inv)
        np.testing.assert_allclose(identity, np.broadcast_to(np.eye(2), identity.shape), atol=1e-12)

    def test_flipped_normal_flips_curvature(self, make_surface):
        _, _, emb = make_surface("ellipsoid_band", 32, 33, a=1.2, c=0.8)
        bundle = geometry_bundle(emb)
        flipped = geometry_bundle(emb, flip_normal=True)
        np.testing.assert_array_equal(flipped.n, -bundle.n)
        np.testing.assert_array_equal(flipped.K, -bundle.K)
        assert flipped.orientation == -1

    def test_gaussian_curvature_of_sphere(self, make_bundle):
        _, bundle = make_bundle("sphere_band", 64, 65, R=2.0)
        mask = interior_mask(bundle.grid)
        np.testing.assert_allclose(gaussian_curvature(bundle)[mask], 0.25, rtol=1e-4)

    def test_collapsed_ring_is_not_an_immersion(self, make_surface):
        _, _, emb = make_surface("cylinder", 16, 17)
        X = emb.X.copy()
        X[:, 9] = X[0, 9]
        with pytest.raises(ImmersionError) as excinfo:
            geometry_bundle(emb.with_positions(X))
        assert excinfo.value.details["node"][1] == 9
        assert excinfo.value.exit_code == 3


class TestOperators:
    def test_laplacian_of_height_on_sphere(self, make_bundle):
        emb, bundle = make_bundle("sphere_band", 64, 65, analytic=True)
        z = emb.X[..., 2]
        mask = interior_mask(bundle.grid)
        np.testing.assert_allclose(laplace_beltrami(bundle, z)[mask], -2.0 * z[mask], atol=1e-4)

    def test_metric_is_divergence_free(self, make_bundle):
        _, bundle = make_bundle("torus", 64, 64)
        np.testing.assert_allclose(cov_div_sym2(bundle, bundle.g_inv), 0.0, atol=1e-5)


class TestInteriorMask:
    def test_periodic_directions_not_trimmed(self):
        grid = make_grid((0.0, 2 * math.pi, 0.0, 2 * math.pi), 16, 16, P, P)
        assert interior_mask(grid, halo=6).all()

    def test_halo_on_clamped_direction(self):
        grid = make_grid((0.0, 2 * math.pi, 0.0, 1.0), 16, 33, P, C)
        mask = interior_mask(grid, halo=6)
        assert mask[:, 6:27].all()
        assert not mask[:, :6].any() and not mask[:, 27:].any()

    def test_small_grid_keeps_interior(self):
        grid = make_grid((0.0, 1.0, 0.0, 1.0), 8, 8, C, C)
        assert interior_mask(grid, halo=6).any()


class TestIdentityAudit:
    def test_report_lists_every_identity(self, make_surface):
        _, _, emb = make_surface("torus", 32, 32)
        report = audit_identities(emb, geometry_bundle(emb))
        names = [entry.name for entry in report.entries]
        assert names == list(identity_residuals(emb, geometry_bundle(emb)))
        assert len(names) == 10
        assert report.get("tangent").max_residual == 0.0
        assert report.get("normalization").max_residual < 1e-14
        assert report.get("orthogonality").max_residual < 1e-14

    @pytest.mark.parametrize(
        "kind, params, sizes",
        [
            ("torus", {}, [(32, 32), (64, 64), (128, 128)]),
            ("catenoid", {"c": 1.0, "L": 2.0}, [(32, 33), (64, 65), (128, 129)]),
        ],
    )
    def test_fourth_order_convergence(self, make_surface, kind, params, sizes):
        maxima = []
        for n1, n2 in sizes:
            _, _, emb = make_surface(kind, n1, n2, **params)
            # fixed physical interior on the clamped catenoid chart
            halo = (n2 - 1) // 4 if kind == "catenoid" else None
            maxima.append(audit_identities(emb, geometry_bundle(emb), halo=halo).max_residuals())

        for name in CONVERGING:
            for coarse, fine in zip(maxima, maxima[1:]):
                if coarse[name] < ROUND_OFF:
                    # both routes share the same first derivatives on this chart
                    assert fine[name] < ROUND_OFF, f"{kind} {name}: {fine[name]:.2e} left round-off"
                    continue
                ratio = coarse[name] / fine[name]
                assert 8.0 <= ratio <= 32.0, f"{kind} {name}: ratio {ratio:.2f}"
        # at least the curvature identities carry the stencil order
        assert all(maxima[0][name] >= ROUND_OFF for name in ("gauss", "gauss_codazzi", "codazzi_mainardi"))
        assert max(maxima[-1][name] for name in CONVERGING) < 1e-4

    def test_flat_plane_at_machine_precision(self, make_surface):
        _, _, emb = make_surface("graph", 33, 33)
        residuals = audit_identities(emb, geometry_bundle(emb)).max_residuals()
        assert len(residuals) == 10
        for name, value in residuals.items():
            assert value <= 1e-13, f"{name}: {value:.2e}"

    def test_corrupted_node_located(self, make_surface):
        _, _, emb = make_surface("torus", 64, 64)
        X = emb.X.copy()
        X[20, 30] += np.array([0.05, 0.0, 0.0])
        corrupted = emb.with_positions(X)
        report = audit_identities(corrupted, geometry_bundle(corrupted))
        entry = report.get("weingarten")
        assert entry.max_residual > 1e-3
        assert abs(entry.worst_node[0] - 20) <= 3
        assert abs(entry.worst_node[1] - 30) <= 3
        assert "weingarten" in report.failures(1e-6)
