"""
Chart Service - 参数网格与解析曲面目录
网格节点按 (i1, i2) 行主序存储；曲面在节点参数处精确求值 (无插值)
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from models.config_models import BoundaryCondition, GridConfig, SurfaceKind, SurfaceSpec
from utils.errors import ConfigurationError
from utils.logger import get_logger

logger = get_logger(__name__)

STENCIL_RADIUS = 2
MIN_NODES = 8
TWO_PI = 2.0 * math.pi

Domain = Tuple[float, float, float, float]


@dataclass(frozen=True)
class Grid:
    """参数域网格"""
    n1: int
    n2: int
    h1: float
    h2: float
    bc1: BoundaryCondition
    bc2: BoundaryCondition
    domain: Domain

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def spacing(self) -> Tuple[float, float]:
        return (self.h1, self.h2)

    @property
    def bcs(self) -> Tuple[BoundaryCondition, BoundaryCondition]:
        return (self.bc1, self.bc2)

    def is_periodic(self, axis: int) -> bool:
        return self.bcs[axis] == BoundaryCondition.PERIODIC

    @property
    def u1(self) -> np.ndarray:
        return self.domain[0] + self.h1 * np.arange(self.n1)

    @property
    def u2(self) -> np.ndarray:
        return self.domain[2] + self.h2 * np.arange(self.n2)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u1, self.u2, indexing="ij")

    def quadrature_weights(self) -> np.ndarray:
        """h1*h2 per node, halved on clamped edges (trapezoidal)."""
        w1 = np.full(self.n1, self.h1)
        w2 = np.full(self.n2, self.h2)
        if not self.is_periodic(0):
            w1[[0, -1]] *= 0.5
        if not self.is_periodic(1):
            w2[[0, -1]] *= 0.5
        return np.outer(w1, w2)


@dataclass(frozen=True)
class EmbeddingField:
    """采样嵌入 X, 形状 (n1, n2, 3)"""
    grid: Grid
    X: np.ndarray

    def __post_init__(self):
        if self.X.shape != (self.grid.n1, self.grid.n2, 3):
            raise ConfigurationError(
                f"embedding shape {self.X.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.X)):
            raise ConfigurationError("embedding contains non-finite components")

    def with_positions(self, X: np.ndarray) -> "EmbeddingField":
        return EmbeddingField(self.grid, X)

    def scaled(self, factor: float) -> "EmbeddingField":
        return EmbeddingField(self.grid, factor * self.X)


def make_grid(
    domain: Domain,
    n1: int,
    n2: int,
    bc1: BoundaryCondition,
    bc2: BoundaryCondition,
) -> Grid:
    """
    Build a parameter grid.

    Periodic directions have length n*h (no duplicated seam node); clamped
    directions have length (n-1)*h.
    """
    bc1 = BoundaryCondition(bc1)
    bc2 = BoundaryCondition(bc2)
    for label, count in (("n1", n1), ("n2", n2)):
        if count < MIN_NODES:
            raise ConfigurationError(
                f"{label}={count} is too small: stencil radius {STENCIL_RADIUS} needs at least {MIN_NODES} nodes",
                {"minimum": MIN_NODES, label: count},
            )

    u1_min, u1_max, u2_min, u2_max = (float(v) for v in domain)
    if not (u1_max > u1_min and u2_max > u2_min):
        raise ConfigurationError(f"degenerate parameter domain {domain}")

    def spacing(lo: float, hi: float, count: int, bc: BoundaryCondition) -> float:
        return (hi - lo) / count if bc == BoundaryCondition.PERIODIC else (hi - lo) / (count - 1)

    return Grid(
        n1=n1,
        n2=n2,
        h1=spacing(u1_min, u1_max, n1, bc1),
        h2=spacing(u2_min, u2_max, n2, bc2),
        bc1=bc1,
        bc2=bc2,
        domain=(u1_min, u1_max, u2_min, u2_max),
    )


def default_boundaries(kind: SurfaceKind) -> Tuple[BoundaryCondition, BoundaryCondition]:
    if kind == SurfaceKind.TORUS:
        return (BoundaryCondition.PERIODIC, BoundaryCondition.PERIODIC)
    if kind == SurfaceKind.GRAPH:
        return (BoundaryCondition.CLAMPED, BoundaryCondition.CLAMPED)
    return (BoundaryCondition.PERIODIC, BoundaryCondition.CLAMPED)


def default_domain(spec: SurfaceSpec) -> Domain:
    kind = spec.kind
    if kind in (SurfaceKind.SPHERE_BAND, SurfaceKind.ELLIPSOID_BAND):
        theta0 = spec.param("theta0")
        return (0.0, TWO_PI, theta0, math.pi - theta0)
    if kind in (SurfaceKind.CYLINDER, SurfaceKind.CATENOID):
        half = 0.5 * spec.param("L")
        return (0.0, TWO_PI, -half, half)
    if kind == SurfaceKind.TORUS:
        return (0.0, TWO_PI, 0.0, TWO_PI)
    return (0.0, spec.param("lx"), 0.0, spec.param("ly"))


def default_grid(spec: SurfaceSpec, n1: int, n2: int) -> Grid:
    """Canonical domain and boundary conditions of a catalog kind."""
    bc1, bc2 = default_boundaries(spec.kind)
    return make_grid(default_domain(spec), n1, n2, bc1, bc2)


def grid_from_config(spec: SurfaceSpec, config: Optional[GridConfig] = None) -> Grid:
    config = config or spec.grid
    if config is None:
        raise ConfigurationError("surface.grid is required", {"key": "grid"})
    default_bc1, default_bc2 = default_boundaries(spec.kind)
    domain = config.domain or default_domain(spec)
    return make_grid(domain, config.n1, config.n2, config.bc1 or default_bc1, config.bc2 or default_bc2)


def check_compatibility(spec: SurfaceSpec, grid: Grid):
    """Reject grids whose boundary conditions or extent do not fit the surface topology."""
    required = default_boundaries(spec.kind)
    if grid.bcs != required:
        raise ConfigurationError(
            f"{spec.kind.value} requires {required[0].value} x {required[1].value} boundary conditions, "
            f"got {grid.bc1.value} x {grid.bc2.value}"
        )

    u1_min, u1_max, u2_min, u2_max = grid.domain
    for axis, (lo, hi) in enumerate(((u1_min, u1_max), (u2_min, u2_max))):
        if grid.is_periodic(axis) and not math.isclose(hi - lo, TWO_PI, rel_tol=1e-12):
            raise ConfigurationError(
                f"periodic angular direction {axis + 1} must span 2*pi, got {hi - lo}"
            )

    if spec.kind in (SurfaceKind.SPHERE_BAND, SurfaceKind.ELLIPSOID_BAND):
        theta0 = spec.param("theta0")
        if u2_min < theta0 - 1e-12 or u2_max > math.pi - theta0 + 1e-12:
            raise ConfigurationError(
                f"band chart must stay within colatitudes [{theta0}, {math.pi - theta0}]"
            )


# ---------------------------------------------------------------------------
# 解析曲面: 返回 X, X_a (.., 2, 3), X_ab (.., 2, 2, 3)
# ---------------------------------------------------------------------------

def _stack(*components) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def _ellipsoid(phi, theta, a, b, c):
    # colatitude from the south pole, so e_phi x e_theta points outward
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(phi)
    X = _stack(a * st * cp, b * st * sp, -c * ct)
    X_phi = _stack(-a * st * sp, b * st * cp, zero)
    X_theta = _stack(a * ct * cp, b * ct * sp, c * st)
    X_pp = _stack(-a * st * cp, -b * st * sp, zero)
    X_pt = _stack(-a * ct * sp, b * ct * cp, zero)
    X_tt = _stack(-a * st * cp, -b * st * sp, c * ct)
    return X, (X_phi, X_theta), ((X_pp, X_pt), (X_pt, X_tt))


def _revolution(phi, z, w, dw, d2w):
    """Surface of revolution with radius profile w(z)."""
    sp, cp = np.sin(phi), np.cos(phi)
    zero = np.zeros_like(phi)
    one = np.ones_like(phi)
    X = _stack(w * cp, w * sp, z)
    X_phi = _stack(-w * sp, w * cp, zero)
    X_z = _stack(dw * cp, dw * sp, one)
    X_pp = _stack(-w * cp, -w * sp, zero)
    X_pz = _stack(-dw * sp, dw * cp, zero)
    X_zz = _stack(d2w * cp, d2w * sp, zero)
    return X, (X_phi, X_z), ((X_pp, X_pz), (X_pz, X_zz))


def _torus(phi, psi, R, r):
    sp, cp = np.sin(phi), np.cos(phi)
    ss, cs = np.sin(psi), np.cos(psi)
    rho = R + r * cs
    zero = np.zeros_like(phi)
    X = _stack(rho * cp, rho * sp, r * ss)
    X_phi = _stack(-rho * sp, rho * cp, zero)
    X_psi = _stack(-r * ss * cp, -r * ss * sp, r * cs)
    X_pp = _stack(-rho * cp, -rho * sp, zero)
    X_ps = _stack(r * ss * sp, -r * ss * cp, zero)
    X_ss = _stack(-r * cs * cp, -r * cs * sp, -r * ss)
    return X, (X_phi, X_psi), ((X_pp, X_ps), (X_ps, X_ss))


def _graph(x, y, amplitude, lx, ly):
    kx, ky = TWO_PI / lx, TWO_PI / ly
    sx, cx = np.sin(kx * x), np.cos(kx * x)
    sy, cy = np.sin(ky * y), np.cos(ky * y)
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    f = amplitude * sx * sy
    fx = amplitude * kx * cx * sy
    fy = amplitude * ky * sx * cy
    fxx = -amplitude * kx * kx * sx * sy
    fxy = amplitude * kx * ky * cx * cy
    fyy = -amplitude * ky * ky * sx * sy
    X = _stack(x, y, f)
    X_x = _stack(one, zero, fx)
    X_y = _stack(zero, one, fy)
    X_xy = _stack(zero, zero, fxy)
    return X, (X_x, X_y), ((_stack(zero, zero, fxx), X_xy), (X_xy, _stack(zero, zero, fyy)))


def _evaluate(spec: SurfaceSpec, U1: np.ndarray, U2: np.ndarray):
    kind = spec.kind
    if kind == SurfaceKind.SPHERE_BAND:
        R = spec.param("R")
        return _ellipsoid(U1, U2, R, R, R)
    if kind == SurfaceKind.ELLIPSOID_BAND:
        return _ellipsoid(U1, U2, spec.param("a"), spec.param("b"), spec.param("c"))
    if kind == SurfaceKind.CYLINDER:
        rho = spec.param("rho")
        ones = np.ones_like(U2)
        return _revolution(U1, U2, rho * ones, 0.0 * ones, 0.0 * ones)
    if kind == SurfaceKind.CATENOID:
        c = spec.param("c")
        return _revolution(U1, U2, c * np.cosh(U2 / c), np.sinh(U2 / c), np.cosh(U2 / c) / c)
    if kind == SurfaceKind.TORUS:
        return _torus(U1, U2, spec.param("R"), spec.param("r"))
    return _graph(U1, U2, spec.param("amplitude"), spec.param("lx"), spec.param("ly"))


def surface_point(spec: SurfaceSpec, u1: float, u2: float) -> np.ndarray:
    """Exact position at one parameter pair."""
    X, _, _ = _evaluate(spec, np.array(u1, dtype=float), np.array(u2, dtype=float))
    return X


def sample_surface(spec: SurfaceSpec, grid: Grid) -> EmbeddingField:
    """Sample a catalog surface exactly at the grid nodes."""
    check_compatibility(spec, grid)
    U1, U2 = grid.mesh()
    X, _, _ = _evaluate(spec, U1, U2)
    logger.debug(f"sampled {spec.kind.value} on {grid.n1}x{grid.n2} grid")
    return EmbeddingField(grid, X)


def analytic_frame(spec: SurfaceSpec, grid: Grid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact embedding and its first and second parametric derivatives.

    Returns:
        X (n1, n2, 3), X_a (n1, n2, 2, 3), X_ab (n1, n2, 2, 2, 3)
    """
    check_compatibility(spec, grid)
    U1, U2 = grid.mesh()
    X, first, second = _evaluate(spec, U1, U2)
    X_a = np.stack(first, axis=-2)
    X_ab = np.stack([np.stack(row, axis=-2) for row in second], axis=-3)
    return X, X_a, X_ab
