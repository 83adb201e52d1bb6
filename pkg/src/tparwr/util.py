# Copyright (c) NXAI GmbH.

import gc
import logging
import os
import time
from collections.abc import Callable
from typing import TypeVar

import numpy as np
import numpy.typing as npt
import pandas as pd

from .graph import Graph

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

T = TypeVar("T")

logger = logging.getLogger(__name__)


def setup_logging(level: str | int = "INFO") -> None:
    # no-op for the handlers when the root logger is already configured
    logging.basicConfig(format=LOG_FORMAT, datefmt=LOG_DATE_FORMAT)
    logging.getLogger().setLevel(level)


def measure_time(fn: Callable[[], T], name: str, repeats: int = 1) -> tuple[T, float]:
    """Runs ``fn`` ``repeats`` times after a garbage collection and returns the last output and the mean ms."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    total = 0.0
    out = None
    for _ in range(repeats):
        gc.collect()
        start = time.perf_counter()
        out = fn()
        total += time.perf_counter() - start
    runtime_ms = 1000.0 * total / repeats
    logger.debug("%s time: %.3f ms", name, runtime_ms)
    return out, runtime_ms


def log_result(out_path: str | os.PathLike, data: dict) -> None:
    """Appends one row to a CSV file, writing the header when the file is new."""
    file_exists = os.path.isfile(out_path)
    pd.DataFrame([data]).to_csv(out_path, mode="a" if file_exists else "w", header=not file_exists, index=False)


def sample_seeds(graph: Graph, num_seeds: int, rng_seed: int) -> npt.NDArray[np.int64]:
    """
    Draws distinct seed nodes uniformly from the nodes with an out-edge to another node.

    Returns fewer than ``num_seeds`` seeds, with a warning in the log, when the pool is smaller.
    """
    if num_seeds < 1:
        raise ValueError(f"num_seeds must be >= 1, got {num_seeds}")
    pool = np.flatnonzero(graph.has_external_out_edge)
    if pool.size == 0:
        raise ValueError("Graph has no node with an out-edge to another node to use as seed")
    if pool.size < num_seeds:
        logger.warning("Only %d candidate seeds available, %d requested", pool.size, num_seeds)
        num_seeds = pool.size
    rng = np.random.default_rng(rng_seed)
    return np.sort(rng.choice(pool, size=num_seeds, replace=False))
