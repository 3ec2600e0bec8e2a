"""
Flow Service - 沿形状残差的法向梯度流
显式 Euler + 能量回溯; 下降符号由一次割线探针确定
"""

import dataclasses
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from models.config_models import EnergyModel, FlowConfig
from services.chart import STENCIL_RADIUS, EmbeddingField, Grid
from services.diffgeo import GeometryBundle, geometry_bundle
from services.energy import conjugates, total_energy
from services.stress import shape_residual, stress_from_conjugates
from utils.errors import ConfigurationError, FlowError, ImmersionError, StagnationError
from utils.logger import get_logger, log_flow_progress, log_stage_complete, log_stage_start

logger = get_logger(__name__)

DT_FLOOR_FACTOR = 1e-12

# curvature residuals nest two first-derivative stencils over K
CURVATURE_HALO_ROWS = 2 * STENCIL_RADIUS


@dataclass
class FlowState:
    """梯度流状态"""
    emb: EmbeddingField
    step: int
    energy: float
    max_shape_residual: float
    dt: float
    descent_sign: int = 1
    accepted: int = 0
    rejected: int = 0
    bundle: Optional[GeometryBundle] = field(default=None, repr=False, compare=False)
    shape_residual: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass
class TrajectoryRecord:
    step: int
    energy: float
    max_residual: float
    dt: float


@dataclass
class FlowResult:
    """run_flow 的结果"""
    state: FlowState
    trajectory: List[TrajectoryRecord]
    converged: bool

    def energies(self) -> np.ndarray:
        return np.array([record.energy for record in self.trajectory])


def _require_model(config: FlowConfig) -> EnergyModel:
    if config.model is None:
        raise ConfigurationError("flow configuration has no energy model", {"key": "flow.model"})
    return config.model


def edge_rows(config: FlowConfig) -> int:
    """Rows held fixed inside each clamped edge ring; unset means the stencil halo for curvature models."""
    if config.clamp_rows is not None:
        return config.clamp_rows
    if config.model is not None and config.model.depends_on_curvature:
        return CURVATURE_HALO_ROWS
    return 0


def build_clamp_mask(grid: Grid, config: FlowConfig) -> np.ndarray:
    """True at movable nodes."""
    movable = np.ones(grid.shape, dtype=bool)
    if config.clamp_edges:
        width = edge_rows(config) + 1
        for axis, count in enumerate(grid.shape):
            if grid.is_periodic(axis):
                continue
            if 2 * width >= count:
                raise ConfigurationError(
                    f"clamping {width} rows at each edge of direction {axis + 1} leaves no movable nodes"
                )
            index = [slice(None), slice(None)]
            index[axis] = slice(0, width)
            movable[tuple(index)] = False
            index[axis] = slice(count - width, count)
            movable[tuple(index)] = False

    for i, j in config.clamp_nodes:
        if not (0 <= i < grid.n1 and 0 <= j < grid.n2):
            raise ConfigurationError(f"clamped node {(i, j)} outside the {grid.n1}x{grid.n2} grid")
        movable[i, j] = False
    return movable


def _evaluate(emb: EmbeddingField, model: EnergyModel) -> Tuple[GeometryBundle, float, np.ndarray]:
    bundle = geometry_bundle(emb)
    stress = stress_from_conjugates(bundle, conjugates(model, bundle))
    return bundle, total_energy(model, bundle), shape_residual(bundle, stress)


def _masked_max(values: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(values[mask])))


def _min_spacing(bundle: GeometryBundle) -> float:
    h1, h2 = bundle.grid.spacing
    return float(min(np.min(np.sqrt(bundle.g[..., 0, 0])) * h1, np.min(np.sqrt(bundle.g[..., 1, 1])) * h2))


def descent_sign(
    emb: EmbeddingField,
    config: FlowConfig,
    residual: np.ndarray,
    bundle: Optional[GeometryBundle] = None,
    mask: Optional[np.ndarray] = None,
) -> int:
    """
    Sign s such that X - dt s eps n lowers the energy, from a secant probe
    E(X + d eps n) against E(X - d eps n).
    """
    model = _require_model(config)
    bundle = bundle or geometry_bundle(emb)
    mask = build_clamp_mask(emb.grid, config) if mask is None else mask

    amplitude = _masked_max(residual, mask)
    if amplitude < 1e-14:
        logger.info("descent probe: shape residual vanishes, using sign +1")
        return 1

    delta = config.probe_scale * _min_spacing(bundle) / amplitude
    direction = (np.where(mask, residual, 0.0))[..., None] * bundle.n
    energy_plus = total_energy(model, geometry_bundle(emb.with_positions(emb.X + delta * direction)))
    energy_minus = total_energy(model, geometry_bundle(emb.with_positions(emb.X - delta * direction)))
    sign = 1 if energy_minus <= energy_plus else -1
    logger.info(
        f"descent probe: E(+)={energy_plus:.12g}, E(-)={energy_minus:.12g}, delta={delta:.3e} -> sign {sign:+d}"
    )
    return sign


def initial_state(initial: EmbeddingField, config: FlowConfig, mask: Optional[np.ndarray] = None) -> FlowState:
    model = _require_model(config)
    mask = build_clamp_mask(initial.grid, config) if mask is None else mask
    bundle, energy, eps = _evaluate(initial, model)
    sign = descent_sign(initial, config, eps, bundle=bundle, mask=mask)
    return FlowState(
        emb=initial,
        step=0,
        energy=energy,
        max_shape_residual=_masked_max(eps, mask),
        dt=config.dt0,
        descent_sign=sign,
        bundle=bundle,
        shape_residual=eps,
    )


def flow_step(state: FlowState, config: FlowConfig, mask: Optional[np.ndarray] = None) -> FlowState:
    """
    One accepted step X <- X - dt s eps n on movable nodes.

    A trial is accepted when its energy is at most E + energy_rtol*|E|, so an
    accepted step may raise the energy by that round-off allowance.

    Raises:
        FlowError: a trial position is no longer an immersion
        StagnationError: dt fell below 1e-12 dt0 without an accepted step
    """
    model = _require_model(config)
    grid = state.emb.grid
    mask = build_clamp_mask(grid, config) if mask is None else mask

    if state.bundle is None or state.shape_residual is None:
        bundle, _, eps = _evaluate(state.emb, model)
        state = dataclasses.replace(state, bundle=bundle, shape_residual=eps)

    velocity = (state.descent_sign * np.where(mask, state.shape_residual, 0.0))[..., None] * state.bundle.n
    allowance = config.energy_rtol * abs(state.energy)
    dt = state.dt
    rejected = state.rejected

    while True:
        if dt < DT_FLOOR_FACTOR * config.dt0:
            raise StagnationError(
                f"step size underflow at step {state.step}: dt={dt:.3e}",
                last_state=state,
                details={"step": state.step, "dt": dt, "energy": state.energy},
            )
        try:
            trial = state.emb.with_positions(state.emb.X - dt * velocity)
            bundle, energy, eps = _evaluate(trial, model)
        except (ImmersionError, ConfigurationError) as exc:
            raise FlowError(
                f"immersion lost at step {state.step + 1}: {exc}",
                last_state=state,
                details={"step": state.step, "dt": dt, **getattr(exc, "details", {})},
            ) from exc

        if energy <= state.energy + allowance:
            break
        logger.debug(f"step {state.step + 1} rejected: energy {energy:.12g} > {state.energy:.12g}, dt={dt:.3e}")
        dt *= config.dt_shrink
        rejected += 1

    return FlowState(
        emb=trial,
        step=state.step + 1,
        energy=energy,
        max_shape_residual=_masked_max(eps, mask),
        dt=dt,
        descent_sign=state.descent_sign,
        accepted=state.accepted + 1,
        rejected=rejected,
        bundle=bundle,
        shape_residual=eps,
    )


def _parameter_laplacian(X: np.ndarray, grid: Grid) -> np.ndarray:
    lap = np.zeros_like(X)
    for axis in range(2):
        if grid.is_periodic(axis):
            lap += np.roll(X, 1, axis=axis) + np.roll(X, -1, axis=axis) - 2.0 * X
        else:
            moved = np.moveaxis(X, axis, 0)
            second = np.zeros_like(moved)
            second[1:-1] = moved[:-2] + moved[2:] - 2.0 * moved[1:-1]
            lap += np.moveaxis(second, 0, axis)
    return lap


def tangential_smoothing(
    emb: EmbeddingField, bundle: GeometryBundle, mask: np.ndarray, weight: float
) -> EmbeddingField:
    """Relax node spacing with the parameter-space Laplacian, normal part removed."""
    displacement = weight * _parameter_laplacian(emb.X, emb.grid)
    displacement -= np.einsum("...i,...i->...", displacement, bundle.n)[..., None] * bundle.n
    displacement[~mask] = 0.0
    return emb.with_positions(emb.X + displacement)


def _smoothed(state: FlowState, config: FlowConfig, mask: np.ndarray) -> FlowState:
    model = _require_model(config)
    candidate = tangential_smoothing(state.emb, state.bundle, mask, config.smooth_weight)
    try:
        bundle, energy, eps = _evaluate(candidate, model)
    except ImmersionError as exc:
        logger.warning(f"tangential smoothing skipped at step {state.step}: {exc}")
        return state
    if energy > state.energy + config.energy_rtol * abs(state.energy):
        logger.debug(f"tangential smoothing skipped at step {state.step}: energy would rise to {energy:.12g}")
        return state
    return dataclasses.replace(
        state,
        emb=candidate,
        energy=energy,
        max_shape_residual=_masked_max(eps, mask),
        bundle=bundle,
        shape_residual=eps,
    )


def _record(state: FlowState) -> TrajectoryRecord:
    return TrajectoryRecord(step=state.step, energy=state.energy, max_residual=state.max_shape_residual, dt=state.dt)


def run_flow(initial: EmbeddingField, config: FlowConfig) -> FlowResult:
    """
    Iterate flow_step until max|eps| <= tol or max_steps accepted steps.

    Reaching max_steps is reported through FlowResult.converged, not raised.
    A FlowError leaves with the trajectory recorded so far, ending at its last_state.
    """
    started = time.perf_counter()
    model = _require_model(config)
    mask = build_clamp_mask(initial.grid, config)
    log_stage_start("flow", model=model.describe(), grid=f"{initial.grid.n1}x{initial.grid.n2}", tol=config.tol)

    state = initial_state(initial, config, mask)
    trajectory = [_record(state)]
    log_flow_progress(state.step, state.energy, state.max_shape_residual, state.dt)

    while state.max_shape_residual > config.tol and state.step < config.max_steps:
        try:
            state = flow_step(state, config, mask)
        except FlowError as exc:
            if trajectory[-1].step != state.step:
                trajectory.append(_record(state))
            exc.trajectory = trajectory
            logger.warning(f"flow stopped at step {state.step}: {exc.message}")
            raise
        if config.smooth_every and state.step % config.smooth_every == 0:
            state = _smoothed(state, config, mask)
        if state.step % config.record_every == 0:
            trajectory.append(_record(state))
            log_flow_progress(state.step, state.energy, state.max_shape_residual, state.dt)

    if trajectory[-1].step != state.step:
        trajectory.append(_record(state))

    converged = state.max_shape_residual <= config.tol
    log_stage_complete(
        "flow",
        time.perf_counter() - started,
        steps=state.step,
        rejected=state.rejected,
        converged=converged,
        energy=f"{state.energy:.12g}",
    )
    return FlowResult(state=state, trajectory=trajectory, converged=converged)


def neck_radius(emb: EmbeddingField) -> float:
    """Smallest ring-averaged distance from the z axis over the u2 rows."""
    radial = np.hypot(emb.X[..., 0], emb.X[..., 1])
    return float(np.min(np.mean(radial, axis=0)))
