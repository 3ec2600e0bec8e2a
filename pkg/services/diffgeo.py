"""
Differential Geometry Service - 诱导几何与结构恒等式审计
四阶有限差分: 周期方向与内部节点用中心差分, clamped 边缘两个节点内用单侧四阶模板

Sign convention: K_ab = e_a . d_b n with n = (e_1 x e_2)/|e_1 x e_2|. With the
outward normal the unit sphere has K = g^ab K_ab = +2. Much of the membrane
literature uses the opposite sign.
"""

import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from config.settings import get_settings
from models.config_models import SurfaceSpec
from models.response_models import IdentityEntry, IdentityReport
from services.chart import EmbeddingField, Grid, analytic_frame
from utils.errors import ImmersionError
from utils.logger import get_logger, log_stage_complete

logger = get_logger(__name__)

# offsets -2..2
_CENTRAL = (1.0, -8.0, 0.0, 8.0, -1.0)
# one-sided stencils for the first two nodes, offsets 0..4 from the edge
_EDGE0 = (-25.0, 48.0, -36.0, 16.0, -3.0)
_EDGE1 = (-3.0, -10.0, 18.0, -6.0, 1.0)


def partial(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """
    Fourth-order derivative along parameter axis 0 (u1) or 1 (u2).

    Trailing component axes are carried along; the operator is linear and
    maps constants to exactly zero.
    """
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    h = grid.spacing[axis]
    scale = 1.0 / (12.0 * h)

    if grid.is_periodic(axis):
        d = (np.roll(f, 2, axis=0) - np.roll(f, -2, axis=0)) + 8.0 * (
            np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)
        )
        return np.moveaxis(d * scale, 0, axis)

    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - f[4:]) + 8.0 * (f[3:-1] - f[1:-3])
    head, tail = f[:5], f[::-1][:5]
    d[0] = sum(w * (head[k] - head[0]) for k, w in enumerate(_EDGE0))
    d[1] = sum(w * (head[k] - head[1]) for k, w in enumerate(_EDGE1))
    d[-1] = -sum(w * (tail[k] - tail[0]) for k, w in enumerate(_EDGE0))
    d[-2] = -sum(w * (tail[k] - tail[1]) for k, w in enumerate(_EDGE1))
    return np.moveaxis(d * scale, 0, axis)


def gradient(values: np.ndarray, grid: Grid, stack_axis: int = -1) -> np.ndarray:
    """(d_1 f, d_2 f) stacked at stack_axis."""
    return np.stack([partial(values, grid, 0), partial(values, grid, 1)], axis=stack_axis)


@dataclass
class GeometryBundle:
    """逐节点几何量: e_a, n, g_ab, g^ab, sqrt(g), K_ab, Gamma^c_ab"""
    grid: Grid
    X: np.ndarray            # (n1, n2, 3)
    e: np.ndarray            # (n1, n2, 2, 3) e[a] = d_a X
    n: np.ndarray            # (n1, n2, 3)
    g: np.ndarray            # (n1, n2, 2, 2)
    g_inv: np.ndarray        # (n1, n2, 2, 2)
    sqrt_g: np.ndarray       # (n1, n2)
    K: np.ndarray            # (n1, n2, 2, 2), symmetrized
    gamma: np.ndarray        # (n1, n2, 2, 2, 2) gamma[c, a, b] = Gamma^c_ab
    gamma_lower: np.ndarray  # (n1, n2, 2, 2, 2) gamma_lower[c, a, b] = Gamma_{c,ab}
    K_asymmetry: np.ndarray = field(repr=False)  # (n1, n2) antisymmetric part of e_a . d_b n
    orientation: int = 1
    analytic: bool = False

    @cached_property
    def K_mixed(self) -> np.ndarray:
        """K_a^b = K_ac g^cb, index order [a, b]."""
        return np.einsum("...ac,...cb->...ab", self.K, self.g_inv)

    @cached_property
    def K_up(self) -> np.ndarray:
        """K^ab = g^ac K_cd g^db."""
        return raise_indices(self, self.K)

    @cached_property
    def mean_trace(self) -> np.ndarray:
        """K = g^ab K_ab (twice the mean curvature)."""
        return np.einsum("...ab,...ab->...", self.g_inv, self.K)

    @cached_property
    def curvature_square(self) -> np.ndarray:
        """K_ab K^ab."""
        return np.einsum("...ab,...ab->...", self.K, self.K_up)

    @property
    def mean_curvature(self) -> np.ndarray:
        return 0.5 * self.mean_trace

    @cached_property
    def extrinsic_gaussian(self) -> np.ndarray:
        """det K / det g."""
        return np.linalg.det(self.K) / self.sqrt_g ** 2

    @property
    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.K_asymmetry)))


def raise_indices(bundle: GeometryBundle, t_lower: np.ndarray) -> np.ndarray:
    """t^ab = g^ac t_cd g^db."""
    return np.einsum("...ac,...cd,...db->...ab", bundle.g_inv, t_lower, bundle.g_inv)


def _metric_from_frame(e: np.ndarray) -> np.ndarray:
    return np.einsum("...ai,...bi->...ab", e, e)


def _metric_inverse(g: np.ndarray) -> np.ndarray:
    """Closed-form 2x2 inverse, symmetric to the last bit."""
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 0, 1]
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1] / det
    inv[..., 1, 1] = g[..., 0, 0] / det
    inv[..., 0, 1] = -g[..., 0, 1] / det
    inv[..., 1, 0] = inv[..., 0, 1]
    return inv


def _unit_normal(grid: Grid, e: np.ndarray, flip_normal: bool) -> Tuple[np.ndarray, np.ndarray]:
    first, second = e[..., 0, :], e[..., 1, :]
    cross = np.cross(second, first) if flip_normal else np.cross(first, second)
    area = np.linalg.norm(cross, axis=-1)

    eps_det = get_settings().det_epsilon_factor * float(np.median(area))
    if np.any(area <= eps_det):
        worst = np.unravel_index(int(np.argmin(area)), area.shape)
        raise ImmersionError(
            f"degenerate metric at node {tuple(int(i) for i in worst)}: "
            f"sqrt(det g) = {float(area[worst]):.3e} <= {eps_det:.3e}",
            {"node": [int(i) for i in worst], "sqrt_g": float(area[worst]), "epsilon": eps_det},
        )
    return cross / area[..., None], area


def _christoffel_lower(dg: np.ndarray) -> np.ndarray:
    """Gamma_{d,ab} = (d_a g_bd + d_b g_ad - d_d g_ab)/2 with dg[k, i, j] = d_k g_ij."""
    return 0.5 * (
        np.einsum("...abd->...dab", dg) + np.einsum("...bad->...dab", dg) - dg
    )


def geometry_bundle(emb: EmbeddingField, flip_normal: bool = False) -> GeometryBundle:
    """
    Geometry of a sampled embedding by finite differences.

    Args:
        emb: sampled embedding
        flip_normal: use e_2 x e_1 instead of e_1 x e_2

    Raises:
        ImmersionError: sqrt(det g) <= eps_det at some node
    """
    started = time.perf_counter()
    grid = emb.grid

    e = gradient(emb.X, grid, stack_axis=-2)
    n, sqrt_g = _unit_normal(grid, e, flip_normal)
    g = _metric_from_frame(e)
    g_inv = _metric_inverse(g)

    dn = gradient(n, grid, stack_axis=-2)
    K_raw = np.einsum("...ai,...bi->...ab", e, dn)
    K = 0.5 * (K_raw + np.swapaxes(K_raw, -1, -2))
    asymmetry = 0.5 * (K_raw[..., 0, 1] - K_raw[..., 1, 0])

    dg = gradient(g, grid, stack_axis=-3)
    gamma_lower = _christoffel_lower(dg)
    gamma = np.einsum("...cd,...dab->...cab", g_inv, gamma_lower)

    bundle = GeometryBundle(
        grid=grid,
        X=emb.X,
        e=e,
        n=n,
        g=g,
        g_inv=g_inv,
        sqrt_g=sqrt_g,
        K=K,
        gamma=gamma,
        gamma_lower=gamma_lower,
        K_asymmetry=asymmetry,
        orientation=-1 if flip_normal else 1,
    )
    log_stage_complete(
        "geometry_bundle",
        time.perf_counter() - started,
        grid=f"{grid.n1}x{grid.n2}",
        asymmetry=f"{bundle.max_asymmetry:.2e}",
    )
    return bundle


def analytic_bundle(spec: SurfaceSpec, grid: Grid) -> GeometryBundle:
    """Exact geometry from the closed-form derivatives of a catalog surface."""
    X, e, X_ab = analytic_frame(spec, grid)
    n, sqrt_g = _unit_normal(grid, e, flip_normal=False)
    g = _metric_from_frame(e)
    g_inv = _metric_inverse(g)
    K = -np.einsum("...abi,...i->...ab", X_ab, n)
    gamma_lower = np.einsum("...di,...abi->...dab", e, X_ab)
    gamma = np.einsum("...cd,...dab->...cab", g_inv, gamma_lower)
    return GeometryBundle(
        grid=grid,
        X=X,
        e=e,
        n=n,
        g=g,
        g_inv=g_inv,
        sqrt_g=sqrt_g,
        K=K,
        gamma=gamma,
        gamma_lower=gamma_lower,
        K_asymmetry=np.zeros(grid.shape),
        analytic=True,
    )


# ---------------------------------------------------------------------------
# 协变微分
# ---------------------------------------------------------------------------

def cov_grad_scalar(bundle: GeometryBundle, phi: np.ndarray) -> np.ndarray:
    """nabla_a phi (covector)."""
    return gradient(phi, bundle.grid)


def cov_div_vector(bundle: GeometryBundle, v: np.ndarray) -> np.ndarray:
    """nabla_a v^a = (1/sqrt g) d_a (sqrt g v^a)."""
    flux = bundle.sqrt_g[..., None] * v
    grid = bundle.grid
    return (partial(flux[..., 0], grid, 0) + partial(flux[..., 1], grid, 1)) / bundle.sqrt_g


def cov_div_sym2(bundle: GeometryBundle, t: np.ndarray) -> np.ndarray:
    """(nabla_a t^ab)_b = d_a t^ab + Gamma^a_ac t^cb + Gamma^b_ac t^ac."""
    grid = bundle.grid
    divergence = partial(t[..., 0, :], grid, 0) + partial(t[..., 1, :], grid, 1)
    trace = np.einsum("...aac->...c", bundle.gamma)
    return (
        divergence
        + np.einsum("...c,...cb->...b", trace, t)
        + np.einsum("...bac,...ac->...b", bundle.gamma, t)
    )


def cov_div_world(bundle: GeometryBundle, F: np.ndarray) -> np.ndarray:
    """Divergence of a surface vector of 3-vectors, component-wise: (1/sqrt g) d_a (sqrt g F^a)."""
    flux = bundle.sqrt_g[..., None, None] * F
    grid = bundle.grid
    return (partial(flux[..., 0, :], grid, 0) + partial(flux[..., 1, :], grid, 1)) / bundle.sqrt_g[..., None]


def laplace_beltrami(bundle: GeometryBundle, phi: np.ndarray) -> np.ndarray:
    """(1/sqrt g) d_a (sqrt g g^ab d_b phi); trailing component axes of phi are carried along."""
    dphi = gradient(phi, bundle.grid, stack_axis=2)
    raised = np.einsum("ijab,ijb...->ija...", bundle.g_inv, dphi)
    flux = raised * bundle.sqrt_g.reshape(bundle.sqrt_g.shape + (1,) * (raised.ndim - 2))
    grid = bundle.grid
    total = partial(flux[:, :, 0], grid, 0) + partial(flux[:, :, 1], grid, 1)
    return total / bundle.sqrt_g.reshape(bundle.sqrt_g.shape + (1,) * (total.ndim - 2))


def cov_deriv_lower2(bundle: GeometryBundle, t: np.ndarray) -> np.ndarray:
    """nabla_a t_bc = d_a t_bc - Gamma^d_ab t_dc - Gamma^d_ac t_bd, index order [a, b, c]."""
    dt = gradient(t, bundle.grid, stack_axis=-3)
    return (
        dt
        - np.einsum("...dab,...dc->...abc", bundle.gamma, t)
        - np.einsum("...dac,...bd->...abc", bundle.gamma, t)
    )


def riemann_lower(bundle: GeometryBundle) -> np.ndarray:
    """
    R_abcd from the metric alone, index order [a, b, c, d].

    Uses derivatives of the Christoffel symbols of the first kind,
    d_c Gamma^a_db = g^ae (d_c Gamma_{e,db} - d_c g_eh Gamma^h_db).
    """
    grid = bundle.grid
    dgamma_lower = gradient(bundle.gamma_lower, grid, stack_axis=-4)  # [c, e, d, b]
    dg = gradient(bundle.g, grid, stack_axis=-3)                      # [c, e, h]
    # d_c Gamma_{a,db} - d_c g_ah Gamma^h_db  ->  [c, a, d, b]
    lowered = dgamma_lower - np.einsum("...cah,...hdb->...cadb", dg, bundle.gamma)
    quadratic = np.einsum("...af,...fce,...edb->...abcd", bundle.g, bundle.gamma, bundle.gamma)
    return (
        np.einsum("...cadb->...abcd", lowered)
        - np.einsum("...dacb->...abcd", lowered)
        + quadratic
        - np.einsum("...abdc->...abcd", quadratic)
    )


def riemann_1212(bundle: GeometryBundle) -> np.ndarray:
    return riemann_lower(bundle)[..., 0, 1, 0, 1]


def gaussian_curvature(bundle: GeometryBundle) -> np.ndarray:
    """Intrinsic Gaussian curvature R_1212 / det g."""
    return riemann_1212(bundle) / bundle.sqrt_g ** 2


# ---------------------------------------------------------------------------
# 恒等式审计
# ---------------------------------------------------------------------------

def interior_mask(grid: Grid, halo: Optional[int] = None) -> np.ndarray:
    """Nodes further than `halo` nodes from every clamped edge."""
    if halo is None:
        halo = get_settings().audit_halo
    mask = np.ones(grid.shape, dtype=bool)
    for axis, count in enumerate(grid.shape):
        if grid.is_periodic(axis):
            continue
        width = min(halo, (count - 1) // 2)
        if width == 0:
            continue
        index = [slice(None), slice(None)]
        index[axis] = slice(0, width)
        mask[tuple(index)] = False
        index[axis] = slice(count - width, count)
        mask[tuple(index)] = False
    return mask


def pointwise_magnitude(residual: np.ndarray, grid: Grid) -> np.ndarray:
    """Euclidean norm over all trailing component axes."""
    flat = np.asarray(residual, dtype=float).reshape(grid.n1, grid.n2, -1)
    return np.sqrt(np.sum(flat * flat, axis=-1))


def residual_norms(residual: np.ndarray, bundle: GeometryBundle, mask: np.ndarray) -> Tuple[float, float]:
    """(max norm, area-weighted L2 norm) over the masked nodes."""
    magnitude = pointwise_magnitude(residual, bundle.grid)
    weights = bundle.sqrt_g * bundle.grid.quadrature_weights()
    max_norm = float(np.max(magnitude[mask]))
    l2_norm = float(np.sqrt(np.sum((magnitude ** 2 * weights)[mask])))
    return max_norm, l2_norm


def identity_residuals(emb: EmbeddingField, bundle: GeometryBundle) -> Dict[str, np.ndarray]:
    """Pointwise residual fields of every structural identity."""
    grid = emb.grid
    e, n, K = bundle.e, bundle.n, bundle.K

    dX = gradient(emb.X, grid, stack_axis=-2)
    dn = gradient(n, grid, stack_axis=-2)
    de = gradient(e, grid, stack_axis=-3)  # [a, b, i] = d_a e_b
    nabla_e = de - np.einsum("...cab,...ci->...abi", bundle.gamma, e)

    # curvature through the Gauss equations, independent of d n
    K_gauss = -np.einsum("...abi,...i->...ab", nabla_e, n)
    K_gauss = 0.5 * (K_gauss + np.swapaxes(K_gauss, -1, -2))

    nabla_K = cov_deriv_lower2(bundle, K)
    codazzi = np.stack([nabla_K[..., 0, 1, c] - nabla_K[..., 1, 0, c] for c in range(2)], axis=-1)

    gauss_codazzi = riemann_1212(bundle) - (K[..., 0, 0] * K[..., 1, 1] - K[..., 0, 1] ** 2)

    sigma = np.einsum("...ab,...ai,...bi->...", bundle.g_inv, dn, dn) - np.einsum(
        "...ab,...ab->...", K_gauss, raise_indices(bundle, K_gauss)
    )

    laplace_X = laplace_beltrami(bundle, emb.X) + bundle.mean_trace[..., None] * n

    return {
        "tangent": dX - e,
        "weingarten": dn - np.einsum("...ab,...bi->...ai", bundle.K_mixed, e),
        "gauss": nabla_e + K[..., None] * n[..., None, None, :],
        "gauss_codazzi": gauss_codazzi,
        "codazzi_mainardi": codazzi,
        "orthogonality": np.einsum("...ai,...i->...a", e, n),
        "normalization": np.einsum("...i,...i->...", n, n) - 1.0,
        "sigma_model": sigma,
        "laplace_embedding": laplace_X,
        "curvature_symmetry": bundle.K_asymmetry,
    }


def audit_identities(
    emb: EmbeddingField, bundle: GeometryBundle, halo: Optional[int] = None
) -> IdentityReport:
    """
    Residual norms of every identity over interior nodes.

    Large residuals are data, never errors.
    """
    started = time.perf_counter()
    mask = interior_mask(emb.grid, halo)
    entries = []
    for name, residual in identity_residuals(emb, bundle).items():
        max_norm, l2_norm = residual_norms(residual, bundle, mask)
        masked = np.where(mask, pointwise_magnitude(residual, emb.grid), -1.0)
        worst = np.unravel_index(int(np.argmax(masked)), masked.shape)
        entries.append(
            IdentityEntry(
                name=name,
                max_residual=max_norm,
                l2_residual=l2_norm,
                h1=emb.grid.h1,
                h2=emb.grid.h2,
                worst_node=[int(i) for i in worst],
            )
        )
    report = IdentityReport(entries=entries)
    log_stage_complete(
        "audit_identities",
        time.perf_counter() - started,
        worst=max(report.max_residuals().items(), key=lambda item: item[1])[0],
    )
    return report
