"""
Stress Service - 守恒应力张量的两条装配路线、形状方程残差与边界力
f^a = f^ab e_b + f^a n
"""

import dataclasses
import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from models.config_models import CurveSpec, Side
from models.response_models import NormEntry, ResidualNorms
from services.diffgeo import (
    GeometryBundle,
    cov_div_sym2,
    cov_div_vector,
    cov_div_world,
    interior_mask,
    laplace_beltrami,
    residual_norms,
)
from services.energy import ConjugateFields, MultiplierField
from utils.errors import ConfigurationError
from utils.logger import get_logger, log_stage_complete

logger = get_logger(__name__)


@dataclass
class StressField:
    """应力: 切向 f^ab, 法向 f^a, 世界坐标 f^a (两个三维向量)"""
    f_tan: np.ndarray    # (n1, n2, 2, 2)
    f_nor: np.ndarray    # (n1, n2, 2)
    f_world: np.ndarray  # (n1, n2, 2, 3)


@dataclass
class ResidualField:
    """守恒律残差"""
    shape: np.ndarray        # (n1, n2)
    tangential: np.ndarray   # (n1, n2, 2)
    direct_div: np.ndarray   # (n1, n2, 3)
    normal_mismatch: np.ndarray      # direct_div . n - shape
    tangential_mismatch: np.ndarray  # e_b . direct_div - g_bc tangential^c


def world_stress(bundle: GeometryBundle, f_tan: np.ndarray, f_nor: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...bi->...ai", f_tan, bundle.e) + f_nor[..., None] * bundle.n[..., None, :]


def stress_from_conjugates(bundle: GeometryBundle, conj: ConjugateFields) -> StressField:
    """f^ab = T^ab - H^ac K_c^b, f^a = -nabla_b H^ab."""
    f_tan = conj.Tab - np.einsum("...ac,...cb->...ab", conj.Hab, bundle.K_mixed)
    f_nor = -cov_div_sym2(bundle, conj.Hab)
    return StressField(f_tan=f_tan, f_nor=f_nor, f_world=world_stress(bundle, f_tan, f_nor))


def stress_from_multipliers(bundle: GeometryBundle, mult: MultiplierField) -> StressField:
    """f^ab = Lambda^ac K_c^b + 2 lambda^ab, f^a = -lambda_perp^a. lambda_n is not used."""
    f_tan = np.einsum("...ac,...cb->...ab", mult.Lambda, bundle.K_mixed) + 2.0 * mult.lam
    f_nor = -mult.lambda_perp
    return StressField(f_tan=f_tan, f_nor=f_nor, f_world=world_stress(bundle, f_tan, f_nor))


def inject_lambda_n_fault(mult: MultiplierField, fault: Union[float, np.ndarray]) -> MultiplierField:
    """Copy of the multipliers with lambda_n replaced."""
    return dataclasses.replace(mult, lambda_n=np.broadcast_to(np.asarray(fault, dtype=float), mult.lambda_n.shape).copy())


def shape_residual(bundle: GeometryBundle, stress: StressField) -> np.ndarray:
    """nabla_a f^a - K_ab f^ab"""
    return cov_div_vector(bundle, stress.f_nor) - np.einsum("...ab,...ab->...", bundle.K, stress.f_tan)


def residuals(bundle: GeometryBundle, stress: StressField) -> ResidualField:
    """
    Shape residual nabla_a f^a - K_ab f^ab, tangential residual
    nabla_a f^ab + K_c^b f^c, and the component-wise divergence of f^a.
    """
    started = time.perf_counter()
    shape = shape_residual(bundle, stress)
    tangential = cov_div_sym2(bundle, stress.f_tan) + np.einsum(
        "...c,...cb->...b", stress.f_nor, bundle.K_mixed
    )
    direct = cov_div_world(bundle, stress.f_world)

    normal_mismatch = np.einsum("...i,...i->...", direct, bundle.n) - shape
    tangential_mismatch = np.einsum("...bi,...i->...b", bundle.e, direct) - np.einsum(
        "...bc,...c->...b", bundle.g, tangential
    )
    log_stage_complete("residuals", time.perf_counter() - started)
    return ResidualField(
        shape=shape,
        tangential=tangential,
        direct_div=direct,
        normal_mismatch=normal_mismatch,
        tangential_mismatch=tangential_mismatch,
    )


def helfrich_shape_residual(bundle: GeometryBundle, alpha: float, mu: float) -> np.ndarray:
    """-2 alpha Lap K - alpha K K^ab (2 K_ab - K g_ab) + mu K."""
    K = bundle.mean_trace
    bending = K * (2.0 * bundle.curvature_square - K * K)
    return -2.0 * alpha * laplace_beltrami(bundle, K) - alpha * bending + mu * K


def stress_norms(bundle: GeometryBundle, field: ResidualField, mask: Optional[np.ndarray] = None) -> ResidualNorms:
    mask = interior_mask(bundle.grid) if mask is None else mask
    entries = []
    for name in ("shape", "tangential", "direct_div", "normal_mismatch", "tangential_mismatch"):
        max_norm, l2_norm = residual_norms(getattr(field, name), bundle, mask)
        entries.append(NormEntry(name=name, max_residual=max_norm, l2_residual=l2_norm))
    return ResidualNorms(entries=entries, h1=bundle.grid.h1, h2=bundle.grid.h2)


def boundary_force(bundle: GeometryBundle, stress: StressField, curve: CurveSpec) -> np.ndarray:
    """
    Force exerted across a closed coordinate curve on the retained region.

    The curve runs along parameter direction `curve.direction` at node
    `curve.index` of the other direction. With eta_a the outward unit conormal
    of the retained side, eta_a ds = +-sqrt(g) du^d along the curve, so the
    periodic trapezoidal rule reduces to side * sum f^o sqrt(g) h_d.
    """
    grid = bundle.grid
    along = curve.direction - 1
    other = 1 - along
    if not grid.is_periodic(along):
        raise ConfigurationError(
            f"curve along direction {curve.direction} is open: that direction is {grid.bcs[along].value}",
            {"direction": curve.direction},
        )
    if curve.index >= grid.shape[other]:
        raise ConfigurationError(
            f"curve index {curve.index} outside direction {other + 1} with {grid.shape[other]} nodes",
            {"index": curve.index},
        )

    side = 1.0 if curve.retain == Side.BELOW else -1.0
    flux = stress.f_world[..., other, :] * bundle.sqrt_g[..., None]
    line = flux[:, curve.index] if other == 1 else flux[curve.index, :]
    force = side * grid.spacing[along] * np.sum(line, axis=0)
    logger.debug(f"boundary force across direction-{curve.direction} curve at {curve.index}: {force}")
    return force
