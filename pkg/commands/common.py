"""
Command plumbing - 命令共享的运行上下文与曲面准备
"""

import argparse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.settings import get_settings
from models.config_models import OUTPUT_FORMATS, RunConfig
from services.chart import EmbeddingField, Grid, grid_from_config, sample_surface
from services.diffgeo import GeometryBundle, geometry_bundle
from utils.errors import ConfigurationError
from utils.exporters import write_json, write_node_csv, write_obj, write_records_csv
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class RunContext:
    """输出目录、格式与已写文件清单"""
    out_dir: Path
    formats: List[str] = field(default_factory=lambda: list(OUTPUT_FORMATS))
    tol: Optional[float] = None
    outputs: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def _target(self, name: str, kind: str) -> Optional[Path]:
        if kind not in self.formats:
            logger.debug(f"skipping {name}: format {kind} not requested")
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out_dir / name

    def write_json(self, name: str, payload: Any):
        target = self._target(name, "json")
        if target is not None:
            write_json(target, payload)

    def write_node_csv(self, name: str, grid: Grid, fields: Dict[str, np.ndarray]):
        target = self._target(name, "csv")
        if target is not None:
            write_node_csv(target, grid, fields)

    def write_records_csv(self, name: str, records):
        target = self._target(name, "csv")
        if target is not None:
            write_records_csv(target, records)

    def write_obj(self, name: str, emb: EmbeddingField):
        target = self._target(name, "obj")
        if target is not None:
            write_obj(target, emb)


def prepare_embedding(config: RunConfig) -> EmbeddingField:
    """Sample the configured surface, then apply the optional node perturbation."""
    spec = config.surface
    grid = grid_from_config(spec)
    emb = sample_surface(spec, grid)

    if config.perturbation is not None:
        i, j = config.perturbation.node
        if not (0 <= i < grid.n1 and 0 <= j < grid.n2):
            raise ConfigurationError(
                f"perturbed node {(i, j)} outside the {grid.n1}x{grid.n2} grid", {"key": "perturbation.node"}
            )
        X = emb.X.copy()
        X[i, j] += np.asarray(config.perturbation.displacement)
        emb = emb.with_positions(X)
        logger.warning(f"node {(i, j)} displaced by {config.perturbation.displacement}")
    return emb


def prepare_geometry(config: RunConfig) -> Tuple[EmbeddingField, GeometryBundle]:
    emb = prepare_embedding(config)
    return emb, geometry_bundle(emb)


def resolve_tolerance(config: RunConfig, context: RunContext) -> float:
    if context.tol is not None:
        return context.tol
    if config.tol is not None:
        return config.tol
    return get_settings().default_tol


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="run configuration JSON file")
    parser.add_argument("--out", default=None, help="output directory (default: config output_dir or MEMBRANE_OUTPUT_DIR)")
    parser.add_argument("--formats", default=None, help="comma-separated subset of json,csv,obj")
    parser.add_argument("--tol", type=float, default=None, help="tolerance override")
    parser.add_argument("--threads", type=int, default=None, help="threads for node maps (overrides MEMBRANE_THREADS)")
