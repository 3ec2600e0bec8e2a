"""
Flow command - 梯度流求平衡曲面
"""

import argparse
from typing import List, Optional

from commands.common import RunContext, add_common_arguments, prepare_embedding
from models.config_models import FlowConfig, RunConfig, SurfaceKind
from models.response_models import FlowSummary
from services.flow import FlowState, TrajectoryRecord, neck_radius, run_flow
from utils.errors import FlowError, ToleranceFailure
from utils.logger import get_logger

logger = get_logger(__name__)

REVOLUTION_KINDS = (SurfaceKind.CYLINDER, SurfaceKind.CATENOID)


def resolve_flow_config(config: RunConfig) -> FlowConfig:
    """Flow settings with the run-level model filled in when the flow block has none."""
    flow = config.flow or FlowConfig()
    if flow.model is None:
        flow = flow.model_copy(update={"model": config.require_model()})
    return flow


def export_flow(
    config: RunConfig,
    context: RunContext,
    state: FlowState,
    trajectory: List[TrajectoryRecord],
    converged: bool,
    stopped_by: Optional[str] = None,
) -> FlowSummary:
    """写出 trajectory.csv, final.obj 和 flow_summary.json"""
    context.write_records_csv("trajectory.csv", trajectory)
    context.write_obj("final.obj", state.emb)

    summary = FlowSummary(
        converged=converged,
        steps=state.step,
        rejected=state.rejected,
        final_energy=state.energy,
        final_max_residual=state.max_shape_residual,
        final_dt=state.dt,
        descent_sign=state.descent_sign,
        neck_radius=neck_radius(state.emb) if config.surface.kind in REVOLUTION_KINDS else None,
        stopped_by=stopped_by,
    )
    context.write_json("flow_summary.json", summary.model_dump())
    context.summary = summary.model_dump()
    return summary


def cmd_flow(config: RunConfig, context: RunContext):
    """Relax the configured surface; not reaching tol within max_steps exits with 2."""
    flow = resolve_flow_config(config)
    if context.tol is not None:
        flow = flow.model_copy(update={"tol": context.tol})
    initial = prepare_embedding(config)

    try:
        result = run_flow(initial, flow)
    except FlowError as exc:
        # the last valid state is still a surface worth inspecting
        if exc.last_state is not None:
            state = exc.last_state
            trajectory = exc.trajectory or [
                TrajectoryRecord(step=state.step, energy=state.energy, max_residual=state.max_shape_residual, dt=state.dt)
            ]
            export_flow(config, context, state, trajectory, False, stopped_by=exc.error_code)
        raise

    state = result.state
    export_flow(config, context, state, result.trajectory, result.converged)

    if not result.converged:
        raise ToleranceFailure(
            f"flow stopped after {state.step} steps with max|eps|={state.max_shape_residual:.3e} > tol={flow.tol:g}",
            {"steps": state.step, "max_residual": state.max_shape_residual},
        )


def register(subparsers: argparse._SubParsersAction):
    parser = subparsers.add_parser("flow", help="normal gradient flow toward an equilibrium shape")
    add_common_arguments(parser)
    parser.set_defaults(handler=cmd_flow)
