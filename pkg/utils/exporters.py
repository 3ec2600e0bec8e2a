"""
Exporters - 结果文件写出
JSON 与 CSV 使用最短往返浮点表示; OBJ 顶点按网格行主序
"""

import dataclasses
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np
import pandas as pd

from services.chart import EmbeddingField, Grid


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def component_columns(name: str, values: np.ndarray, grid: Grid) -> Dict[str, np.ndarray]:
    """Flatten a per-node field into columns name, name_1, name_12, ... (1-based component indices)."""
    values = np.asarray(values, dtype=float)
    trailing = values.shape[2:]
    flat = values.reshape(grid.n1 * grid.n2, -1)
    if not trailing:
        return {name: flat[:, 0]}
    columns = {}
    for k, index in enumerate(np.ndindex(*trailing)):
        columns[f"{name}_{''.join(str(i + 1) for i in index)}"] = flat[:, k]
    return columns


def node_frame(grid: Grid, fields: Dict[str, np.ndarray]) -> pd.DataFrame:
    """One row per node in row-major order: i1, i2, then every component."""
    i1, i2 = np.indices(grid.shape)
    data = {"i1": i1.ravel(), "i2": i2.ravel()}
    for name, values in fields.items():
        data.update(component_columns(name, values, grid))
    return pd.DataFrame(data)


def write_node_csv(path: Path, grid: Grid, fields: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    node_frame(grid, fields).to_csv(path, index=False)
    return path


def write_records_csv(path: Path, records: Iterable[Any]) -> Path:
    """CSV from a sequence of dataclass records."""
    path = Path(path)
    rows: List[Dict[str, Any]] = [dataclasses.asdict(record) for record in records]
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def obj_faces(grid: Grid) -> List[tuple]:
    """
    Triangles of the quad grid, 1-based vertex indices.

    Quad (i,j),(i+1,j),(i+1,j+1),(i,j+1) is split along the (i,j)-(i+1,j+1)
    diagonal; periodic directions wrap.
    """
    n1, n2 = grid.shape
    rows = n1 if grid.is_periodic(0) else n1 - 1
    cols = n2 if grid.is_periodic(1) else n2 - 1

    def vertex(i: int, j: int) -> int:
        return (i % n1) * n2 + (j % n2) + 1

    faces = []
    for i in range(rows):
        for j in range(cols):
            a, b, c, d = vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return faces


def write_obj(path: Path, emb: EmbeddingField) -> Path:
    path = Path(path)
    lines = [f"# {emb.grid.n1}x{emb.grid.n2} grid, row-major vertices"]
    for x, y, z in emb.X.reshape(-1, 3):
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for a, b, c in obj_faces(emb.grid):
        lines.append(f"f {a} {b} {c}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_obj_vertices(path: Path) -> np.ndarray:
    vertices = [
        [float(v) for v in line.split()[1:4]]
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.startswith("v ")
    ]
    return np.array(vertices)
