# Copyright (c) NXAI GmbH.

import logging
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .cpi import CpiParams, SeedSet, cpi_run
from .graph import Backend, Graph, ScoreVector, generate_random_graph, stochastic_sweep

logger = logging.getLogger(__name__)

COLUMN_BLOCK_SIZE = 64


@dataclass(frozen=True)
class ColumnDifference:
    iteration: int
    c_i: float
    mean_nnz: float
    sampled: bool


@dataclass(frozen=True)
class BlockComparison:
    family_end: int
    graph_stat: float
    random_stat: float


def _check_seed(graph: Graph, seed: int) -> None:
    if not 0 <= seed < graph.node_count:
        raise ValueError(f"Invalid seed {seed} for graph with {graph.node_count} nodes")


def _column_block(
    graph: Graph,
    columns: np.ndarray,
    seed_columns: dict[int, ScoreVector],
    iterations: Sequence[int],
    backend: Backend,
) -> tuple[dict[int, float], dict[int, int]]:
    """Propagates the unit vectors of ``columns`` together; returns L1 distance and nnz sums per iteration."""
    x = np.zeros((graph.node_count, columns.size))
    x[columns, np.arange(columns.size)] = 1.0
    distance, nnz = {}, {}
    wanted = set(iterations)
    for i in range(1, max(iterations) + 1):
        x = stochastic_sweep(graph, x, backend=backend)
        if i in wanted:
            distance[i] = float(np.abs(x - seed_columns[i][:, None]).sum())
            nnz[i] = int(np.count_nonzero(x))
    return distance, nnz


def column_difference_profile(
    graph: Graph,
    seed: int,
    iterations: Sequence[int],
    sample_size: int = 1000,
    rng_seed: int = 0,
    threads: int = 1,
    backend: Backend = "numpy",
) -> list[ColumnDifference]:
    """
    Average L1 distance between the seed's column of ``(A_norm^T)^i`` and the other columns, for several ``i``.

    Columns are obtained by undamped sweeps of unit vectors, propagated in blocks of ``COLUMN_BLOCK_SIZE``. With
    ``sample_size >= n - 1`` every column is enumerated; otherwise ``sample_size`` columns other than the seed are
    drawn without replacement and the sum over all ``j != seed`` is extrapolated from their mean. ``mean_nnz``
    averages the nonzero counts of the evaluated columns including the seed's own.

    Args:
        graph (Graph): Graph to analyze.
        seed (int): Reference column.
        iterations (Sequence[int]): Powers ``i >= 1`` to report.
        sample_size (int): Number of compared columns. Default: 1000
        rng_seed (int): Seed of the column sampler. Default: 0
        threads (int): Number of column blocks processed concurrently. Default: 1
        backend (numpy | torch): Sparse kernel. Default: numpy

    Returns:
        list[ColumnDifference]: One entry per requested iteration, in ascending order.
    """
    _check_seed(graph, seed)
    iterations = sorted(set(int(i) for i in iterations))
    if not iterations or iterations[0] < 1:
        raise ValueError(f"iterations must be non-empty and >= 1, got {iterations}")
    if sample_size < 1:
        raise ValueError(f"sample_size must be >= 1, got {sample_size}")

    n = graph.node_count
    others = np.delete(np.arange(n), seed)
    sampled = sample_size < others.size
    if sampled:
        others = np.sort(np.random.default_rng(rng_seed).choice(others, size=sample_size, replace=False))
        warnings.warn(
            f"Column statistics estimated from {sample_size} of {n - 1} columns", UserWarning, stacklevel=2
        )

    seed_columns: dict[int, ScoreVector] = {}
    x = np.zeros(n)
    x[seed] = 1.0
    for i in range(1, iterations[-1] + 1):
        x = stochastic_sweep(graph, x, backend=backend)
        if i in iterations:
            seed_columns[i] = x

    blocks = [others[start : start + COLUMN_BLOCK_SIZE] for start in range(0, others.size, COLUMN_BLOCK_SIZE)]
    results = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_column_block)(graph, block, seed_columns, iterations, backend) for block in blocks
    )

    profile = []
    for i in iterations:
        distance = sum(result[0][i] for result in results)
        nnz = sum(result[1][i] for result in results) + np.count_nonzero(seed_columns[i])
        c_i = (n - 1) / n * distance / others.size if others.size else 0.0
        mean_nnz = nnz / (others.size + 1)
        logger.debug("Column difference i=%d C_i=%.6f mean_nnz=%.1f", i, c_i, mean_nnz)
        profile.append(ColumnDifference(iteration=i, c_i=float(c_i), mean_nnz=float(mean_nnz), sampled=sampled))
    return profile


def column_difference_stat(
    graph: Graph,
    seed: int,
    iteration: int,
    sample_size: int = 1000,
    rng_seed: int = 0,
    threads: int = 1,
    backend: Backend = "numpy",
) -> tuple[float, float]:
    """``(C_i, mean nnz per column)`` for a single power ``i``."""
    (entry,) = column_difference_profile(graph, seed, [iteration], sample_size, rng_seed, threads, backend)
    return entry.c_i, entry.mean_nnz


def block_structure_stat(
    graph: Graph,
    seed: int,
    family_end: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    threads: int = 1,
    backend: Backend = "numpy",
) -> float:
    """L1 change of the family part ``f`` under ``S`` further undamped sweeps.

    Small values mean the early random-walk mass stays inside the seed's neighborhood.
    """
    _check_seed(graph, seed)
    if family_end < 1:
        raise ValueError(f"family_end (S) must be >= 1, got {family_end}")
    params = CpiParams(restart_prob=c, tolerance=tolerance, start_iter=0, terminal_iter=family_end - 1)
    family = cpi_run(graph, SeedSet.single(seed, graph.node_count), params, threads=threads, backend=backend).scores

    spread = family
    for _ in range(family_end):
        spread = stochastic_sweep(graph, spread, threads=threads, backend=backend)
    return float(np.abs(spread - family).sum())


def block_structure_comparison(
    graph: Graph,
    seeds: Sequence[int],
    family_end: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    rng_seed: int = 0,
    threads: int = 1,
    backend: Backend = "numpy",
) -> BlockComparison:
    """Mean block-structure statistic over ``seeds`` on ``graph`` and on a uniform random graph with equal n and m."""
    if not seeds:
        raise ValueError("seeds must not be empty")
    n = graph.node_count
    counterpart = generate_random_graph(
        n, min(graph.edge_count, n * (n - 1)), rng_seed, dangling_policy=graph.dangling_policy
    )
    logger.info("Random counterpart: %r", counterpart)

    def mean_stat(g: Graph) -> float:
        return float(np.mean([block_structure_stat(g, s, family_end, c, tolerance, threads, backend) for s in seeds]))

    return BlockComparison(family_end=family_end, graph_stat=mean_stat(graph), random_stat=mean_stat(counterpart))
