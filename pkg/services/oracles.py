"""
Oracles - 闭式参考值
悬链面颈半径、球带 Willmore 能量、Helfrich 共轭量与应力闭式
"""

import math
from functools import lru_cache
from typing import Dict

import numpy as np
from scipy.optimize import brentq

from services.diffgeo import GeometryBundle, cov_grad_scalar
from utils.errors import ConfigurationError
from utils.logger import get_logger

logger = get_logger(__name__)


@lru_cache()
def _critical_ratio() -> float:
    """x* with x* tanh x* = 1: minimum of c cosh(L/2c) at fixed L sits at L/(2c) = x*."""
    return brentq(lambda x: x * math.tanh(x) - 1.0, 0.5, 2.0, xtol=1e-15)


def catenoid_existence_limit() -> float:
    """Largest ring separation L/a for which a catenoid spans two coaxial rings of radius a."""
    x = _critical_ratio()
    return 2.0 * x / math.cosh(x)


def catenoid_neck_radius(a: float, L: float) -> float:
    """
    Neck radius c of the stable catenoid spanning rings of radius a at
    separation L, i.e. the larger root of a = c cosh(L/(2c)).
    """
    if a <= 0.0 or L <= 0.0:
        raise ConfigurationError(f"ring radius and separation must be positive, got a={a}, L={L}")
    if L / a > catenoid_existence_limit():
        raise ConfigurationError(
            f"no catenoid spans rings with L/a = {L / a:.6f} > {catenoid_existence_limit():.6f}",
            {"ratio": L / a},
        )

    c_min = L / (2.0 * _critical_ratio())
    residual = lambda c: c * math.cosh(L / (2.0 * c)) - a
    if residual(c_min) >= 0.0:
        # touching the existence limit: double root
        return c_min
    root = brentq(residual, c_min, a, xtol=1e-14)
    logger.debug(f"catenoid neck radius for a={a}, L={L}: {root}")
    return root


def band_area(R: float, theta0: float) -> float:
    """Area of the sphere band between colatitudes theta0 and pi - theta0."""
    return 4.0 * math.pi * R * R * math.cos(theta0)


def sphere_band_willmore_energy(theta0: float, alpha: float = 1.0) -> float:
    """alpha * integral of K^2 over the band; K = 2/R makes it scale invariant."""
    return 16.0 * math.pi * alpha * math.cos(theta0)


def cylinder_area(rho: float, L: float) -> float:
    return 2.0 * math.pi * rho * L


def helfrich_closed_forms(alpha: float, mu: float, bundle: GeometryBundle) -> Dict[str, np.ndarray]:
    """
    Closed-form Helfrich conjugates and stress:
    H^ab = 2 alpha g^ab K, T^ab = alpha K (4 K^ab - K g^ab) - mu g^ab,
    f^ab = alpha K (2 K^ab - K g^ab) - mu g^ab, f^a = -2 alpha nabla^a K.
    """
    K = bundle.mean_trace[..., None, None]
    g_inv = bundle.g_inv
    K_up = bundle.K_up
    grad_K = np.einsum("...ab,...b->...a", g_inv, cov_grad_scalar(bundle, bundle.mean_trace))
    return {
        "Hab": 2.0 * alpha * K * g_inv,
        "Tab": alpha * K * (4.0 * K_up - K * g_inv) - mu * g_inv,
        "f_tan": alpha * K * (2.0 * K_up - K * g_inv) - mu * g_inv,
        "f_nor": -2.0 * alpha * grad_K,
    }
