"""
Energy Service - 哈密顿密度、总能量、共轭量与乘子
密度族: H = sum c_pq I1^p I2^q, I1 = g^ab K_ab, I2 = K_ab K^ab
"""

import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config.settings import get_settings
from models.config_models import EnergyModel
from services.diffgeo import GeometryBundle, cov_div_sym2
from utils.logger import get_logger, log_stage_complete
from utils.parallel import node_map

logger = get_logger(__name__)


@dataclass
class ConjugateFields:
    """H^ab = dH/dK_ab 与 T^ab = -2 g^(-1/2) d(sqrt(g) H)/dg_ab"""
    Hab: np.ndarray  # (..., 2, 2)
    Tab: np.ndarray  # (..., 2, 2)


@dataclass
class MultiplierField:
    """拉格朗日乘子 Lambda^ab, lambda^ab, lambda_perp^a, lambda_n"""
    Lambda: np.ndarray       # (n1, n2, 2, 2)
    lam: np.ndarray          # (n1, n2, 2, 2)
    lambda_perp: np.ndarray  # (n1, n2, 2)
    lambda_n: np.ndarray     # (n1, n2)


def _invariants(g_inv: np.ndarray, K: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """I1, I2 and K^ab."""
    K_up = np.einsum("...ac,...cd,...db->...ab", g_inv, K, g_inv)
    I1 = np.einsum("...ab,...ab->...", g_inv, K)
    I2 = np.einsum("...ab,...ab->...", K, K_up)
    return I1, I2, K_up


def _polynomial(model: EnergyModel, I1: np.ndarray, I2: np.ndarray) -> np.ndarray:
    total = np.zeros_like(I1)
    for term in model.terms:
        total = total + term.c * I1 ** term.p * I2 ** term.q
    return total


def density_from_tensors(model: EnergyModel, g: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Pointwise density on raw lower-index tensors g_ab, K_ab."""
    I1, I2, _ = _invariants(np.linalg.inv(g), K)
    return _polynomial(model, I1, I2)


def density(model: EnergyModel, bundle: GeometryBundle) -> np.ndarray:
    """H at every node."""

    def evaluate(g_inv, K):
        I1, I2, _ = _invariants(g_inv, K)
        return _polynomial(model, I1, I2)

    return node_map(evaluate, bundle.g_inv, bundle.K)


def total_energy(model: EnergyModel, bundle: GeometryBundle) -> float:
    """Trapezoidal quadrature of H sqrt(g) over the parameter domain."""
    weights = bundle.sqrt_g * bundle.grid.quadrature_weights()
    return float(np.sum(density(model, bundle) * weights))


def area(bundle: GeometryBundle) -> float:
    return float(np.sum(bundle.sqrt_g * bundle.grid.quadrature_weights()))


def _conjugate_kernel(
    model: EnergyModel, g: np.ndarray, g_inv: np.ndarray, K: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    I1, I2, K_up = _invariants(g_inv, K)
    K2_up = np.einsum("...ac,...cd,...db->...ab", K_up, g, K_up)

    dH_dI1 = np.zeros_like(I1)
    dH_dI2 = np.zeros_like(I1)
    for term in model.terms:
        if term.p:
            dH_dI1 = dH_dI1 + term.c * term.p * I1 ** (term.p - 1) * I2 ** term.q
        if term.q:
            dH_dI2 = dH_dI2 + term.c * term.q * I1 ** term.p * I2 ** (term.q - 1)
    H = _polynomial(model, I1, I2)

    d1 = dH_dI1[..., None, None]
    d2 = dH_dI2[..., None, None]
    # dI1/dK_ab = g^ab, dI2/dK_ab = 2 K^ab
    Hab = d1 * g_inv + 2.0 * d2 * K_up
    # dI1/dg_ab = -K^ab, dI2/dg_ab = -2 K^ac K_c^b, d sqrt(g)/dg_ab = sqrt(g) g^ab / 2
    Tab = 2.0 * d1 * K_up + 4.0 * d2 * K2_up - H[..., None, None] * g_inv
    return Hab, Tab


def conjugates(model: EnergyModel, bundle: GeometryBundle) -> ConjugateFields:
    """Closed-form chain-rule conjugates at every node."""
    started = time.perf_counter()
    Hab, Tab = node_map(
        lambda g, g_inv, K: _conjugate_kernel(model, g, g_inv, K), bundle.g, bundle.g_inv, bundle.K
    )
    log_stage_complete("conjugates", time.perf_counter() - started, model=model.name)
    return ConjugateFields(Hab=Hab, Tab=Tab)


def _symmetric_derivative(func, tensor: np.ndarray, delta: float) -> np.ndarray:
    """
    Central differences of a scalar function of a symmetric 2x2 tensor.

    Off-diagonal entries are moved together and the result halved, so that
    d t_cd / d t_ab = (delta^a_c delta^b_d + delta^a_d delta^b_c) / 2.
    """
    step = delta * max(float(np.max(np.abs(tensor))), 1.0)
    result = np.zeros((2, 2))
    for a in range(2):
        for b in range(a, 2):
            bump = np.zeros((2, 2))
            bump[a, b] = bump[b, a] = step
            value = (func(tensor + bump) - func(tensor - bump)) / (2.0 * step)
            if a != b:
                value *= 0.5
            result[a, b] = result[b, a] = value
    return result


def conjugates_fd_oracle(
    model: EnergyModel, bundle: GeometryBundle, node: Tuple[int, int], delta: Optional[float] = None
) -> ConjugateFields:
    """
    Finite-difference conjugates at one node, perturbing K_ab (for H^ab) and
    g_ab including the sqrt(g) factor (for T^ab).
    """
    delta = delta or get_settings().oracle_delta
    i, j = node
    g = np.array(bundle.g[i, j], dtype=float)
    K = np.array(bundle.K[i, j], dtype=float)
    sqrt_g = np.sqrt(np.linalg.det(g))

    Hab = _symmetric_derivative(lambda k: float(density_from_tensors(model, g, k)), K, delta)
    weighted = _symmetric_derivative(
        lambda metric: float(np.sqrt(np.linalg.det(metric)) * density_from_tensors(model, metric, K)), g, delta
    )
    return ConjugateFields(Hab=Hab, Tab=-2.0 * weighted / sqrt_g)


def multipliers(
    model: EnergyModel, bundle: GeometryBundle, conj: Optional[ConjugateFields] = None
) -> MultiplierField:
    """
    On-shell multipliers: Lambda = -H^ab, lambda = T^ab/2,
    lambda_perp^a = -nabla_b Lambda^ab, lambda_n = Lambda^ab K_ab / 2.
    """
    conj = conj or conjugates(model, bundle)
    Lambda = -conj.Hab
    lambda_perp = -cov_div_sym2(bundle, Lambda)
    lambda_n = 0.5 * np.einsum("...ab,...ab->...", Lambda, bundle.K)
    return MultiplierField(Lambda=Lambda, lam=0.5 * conj.Tab, lambda_perp=lambda_perp, lambda_n=lambda_n)
