"""
Parallel Utility - 逐节点映射的分块线程池
只用于纯逐点运算 (无模板光晕)；结果与线程数无关
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from config.settings import get_settings


def node_map(
    func: Callable,
    *fields: np.ndarray,
    threads: Optional[int] = None,
    chunk_rows: Optional[int] = None,
):
    """
    Apply a pointwise function to node fields, split into row chunks along i1.

    Args:
        func: function of the node fields returning an array or a tuple of arrays,
            each with the same leading (rows, cols) axes as its inputs
        fields: per-node arrays sharing the leading axis
        threads: worker count (defaults to MEMBRANE_THREADS)
        chunk_rows: rows per chunk

    Returns:
        func applied to the full fields, reassembled in row order
    """
    config = get_settings().get_parallel_config()
    threads = threads or config["threads"]
    chunk_rows = chunk_rows or config["chunk_rows"]

    n_rows = fields[0].shape[0]
    if threads == 1 or n_rows <= chunk_rows:
        return func(*fields)

    slices = [slice(start, min(start + chunk_rows, n_rows)) for start in range(0, n_rows, chunk_rows)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda rows: func(*(f[rows] for f in fields)), slices))

    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[k] for p in parts], axis=0) for k in range(len(parts[0])))
    return np.concatenate(parts, axis=0)
