"""
Geometry commands - audit, stress, energy, force
"""

import argparse

import numpy as np

from commands.common import RunContext, add_common_arguments, prepare_geometry, resolve_tolerance
from models.config_models import RunConfig
from models.response_models import EnergyReport, ForceReport
from services.diffgeo import audit_identities, interior_mask
from services.energy import area, conjugates, density, multipliers, total_energy
from services.stress import (
    boundary_force,
    residuals,
    stress_from_conjugates,
    stress_from_multipliers,
    stress_norms,
)
from utils.errors import ToleranceFailure
from utils.logger import get_logger

logger = get_logger(__name__)


def cmd_audit(config: RunConfig, context: RunContext):
    """Audit every structural identity; residuals above tolerance exit with 2."""
    emb, bundle = prepare_geometry(config)
    tol = resolve_tolerance(config, context)
    report = audit_identities(emb, bundle)
    failures = report.failures(tol)

    context.write_json(
        "identity_report.json",
        {
            "surface": config.surface.kind.value,
            "n1": emb.grid.n1,
            "n2": emb.grid.n2,
            "tol": tol,
            "passed": not failures,
            "failures": failures,
            "identities": report.to_json_list(),
        },
    )
    context.summary = {"passed": not failures, "failures": failures, "max_residuals": report.max_residuals()}

    if failures:
        worst = {name: report.get(name).worst_node for name in failures}
        raise ToleranceFailure(
            f"{len(failures)} identities exceed tol={tol:g}: {', '.join(failures)}",
            {"failures": failures, "worst_nodes": worst},
        )


def cmd_stress(config: RunConfig, context: RunContext):
    """Stress by the conjugate route, residual fields and their norms."""
    model = config.require_model()
    emb, bundle = prepare_geometry(config)
    conj = conjugates(model, bundle)
    stress = stress_from_conjugates(bundle, conj)
    mult = multipliers(model, bundle, conj)
    via_multipliers = stress_from_multipliers(bundle, mult)
    field = residuals(bundle, stress)
    norms = stress_norms(bundle, field, interior_mask(bundle.grid))

    scale = max(float(np.max(np.abs(stress.f_world))), np.finfo(float).tiny)
    route_mismatch = float(np.max(np.abs(stress.f_world - via_multipliers.f_world))) / scale

    context.write_node_csv(
        "stress.csv",
        emb.grid,
        {"f_tan": stress.f_tan, "f_nor": stress.f_nor, "f_world": stress.f_world, "lambda_n": mult.lambda_n},
    )
    context.write_node_csv(
        "residuals.csv",
        emb.grid,
        {"shape": field.shape, "tangential": field.tangential, "direct_div": field.direct_div},
    )
    payload = {"model": model.describe(), **norms.model_dump(), "route_mismatch": route_mismatch}
    context.write_json("residual_norms.json", payload)
    context.summary = {"shape_max": norms.get("shape").max_residual, "route_mismatch": route_mismatch}


def cmd_energy(config: RunConfig, context: RunContext):
    model = config.require_model()
    emb, bundle = prepare_geometry(config)
    report = EnergyReport(
        model=model.describe(),
        energy=total_energy(model, bundle),
        area=area(bundle),
        n1=emb.grid.n1,
        n2=emb.grid.n2,
    )
    context.write_json("energy.json", report.model_dump())
    context.write_node_csv("density.csv", emb.grid, {"density": density(model, bundle), "sqrt_g": bundle.sqrt_g})
    context.summary = {"energy": report.energy, "area": report.area}


def cmd_force(config: RunConfig, context: RunContext):
    model = config.require_model()
    curve = config.require_curve()
    _, bundle = prepare_geometry(config)
    stress = stress_from_conjugates(bundle, conjugates(model, bundle))
    force = boundary_force(bundle, stress, curve)
    report = ForceReport(
        force=[float(v) for v in force],
        magnitude=float(np.linalg.norm(force)),
        direction=curve.direction,
        index=curve.index,
        retain=curve.retain.value,
    )
    context.write_json("force.json", report.model_dump())
    context.summary = {"force": report.force, "magnitude": report.magnitude}


def register(subparsers: argparse._SubParsersAction):
    for name, handler, help_text in (
        ("audit", cmd_audit, "audit structural identities of the sampled surface"),
        ("stress", cmd_stress, "assemble the stress tensor and its conservation residuals"),
        ("energy", cmd_energy, "total energy and density field"),
        ("force", cmd_force, "force across a closed coordinate curve"),
    ):
        parser = subparsers.add_parser(name, help=help_text)
        add_common_arguments(parser)
        parser.set_defaults(handler=handler)
