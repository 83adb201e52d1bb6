# Copyright (c) NXAI GmbH.

import logging
from bisect import bisect_right
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .graph import Backend, Graph, ScoreVector, propagation_sweep

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CpiParams:
    # Restart probability c and convergence tolerance on the L1 norm of the interim vector
    restart_prob: float = 0.15
    tolerance: float = 1e-9

    # Accumulation window [start_iter, terminal_iter]; None means run until convergence
    start_iter: int = 0
    terminal_iter: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.restart_prob < 1.0:
            raise ValueError(f"restart_prob must be in (0, 1), got {self.restart_prob}")

        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

        if self.start_iter < 0:
            raise ValueError(f"start_iter must be non-negative, got {self.start_iter}")

        if self.terminal_iter is not None and self.terminal_iter < self.start_iter:
            raise ValueError(f"terminal_iter ({self.terminal_iter}) must be >= start_iter ({self.start_iter})")


@dataclass(frozen=True)
class SeedSet:
    seeds: tuple[int, ...]
    node_count: int

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("SeedSet must contain at least one node")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("SeedSet must not contain duplicate nodes")
        invalid = [s for s in self.seeds if not 0 <= s < self.node_count]
        if invalid:
            raise ValueError(f"Invalid seed ids {invalid[:5]} for graph with {self.node_count} nodes")

    @classmethod
    def of(cls, nodes: Iterable[int], node_count: int) -> "SeedSet":
        return cls(seeds=tuple(int(s) for s in nodes), node_count=node_count)

    @classmethod
    def single(cls, node: int, node_count: int) -> "SeedSet":
        return cls(seeds=(int(node),), node_count=node_count)

    @classmethod
    def all_nodes(cls, node_count: int) -> "SeedSet":
        return cls(seeds=tuple(range(node_count)), node_count=node_count)

    def seed_vector(self) -> ScoreVector:
        q = np.zeros(self.node_count)
        q[list(self.seeds)] = 1.0 / len(self.seeds)
        return q


@dataclass
class CpiResult:
    scores: ScoreVector
    iterations_run: int
    converged: bool
    residual_l1: float


def _accumulate(
    graph: Graph,
    seeds: SeedSet,
    params: CpiParams,
    boundaries: Sequence[int],
    threads: int,
    backend: Backend,
) -> tuple[list[ScoreVector], int, bool, float]:
    if seeds.node_count != graph.node_count:
        raise ValueError(f"SeedSet built for {seeds.node_count} nodes, graph has {graph.node_count}")

    c = params.restart_prob
    sums = [np.zeros(graph.node_count) for _ in boundaries]

    def add(i: int, x: ScoreVector) -> None:
        segment = bisect_right(boundaries, i) - 1
        if segment >= 0:
            sums[segment] += x

    x = c * seeds.seed_vector()
    add(0, x)
    residual = float(x.sum())

    i = 0
    converged = False
    while params.terminal_iter is None or i < params.terminal_iter:
        i += 1
        x = propagation_sweep(graph, x, c, threads=threads, backend=backend)
        add(i, x)
        residual = float(np.abs(x).sum())
        logger.debug("CPI iteration %d residual %.3e", i, residual)
        if residual < params.tolerance:
            converged = True
            break

    return sums, i, converged, residual


def cpi_run(
    graph: Graph, seeds: SeedSet, params: CpiParams, threads: int = 1, backend: Backend = "numpy"
) -> CpiResult:
    """Cumulative power iteration over the window ``[start_iter, terminal_iter]``.

    Starting from ``x0 = c * q``, every iteration applies one propagation sweep; ``x_i`` is added to the result
    when ``start_iter <= i <= terminal_iter`` (``x0`` included when ``start_iter == 0``). Iteration stops early
    once ``||x_i||_1 < tolerance``, after ``x_i`` has been accumulated.

    Args:
        graph (Graph): Graph to propagate over.
        seeds (SeedSet): Restart nodes; the seed vector puts ``1/|seeds|`` on each.
        params (CpiParams): Restart probability, tolerance and accumulation window.
        threads (int): Parallelism of each sweep; 1 is the bitwise reference. Default: 1
        backend (numpy | torch): Sparse kernel for the sweeps. Default: numpy

    Returns:
        CpiResult: Accumulated scores, number of sweeps, convergence flag and last interim L1 norm.
    """
    sums, iterations, converged, residual = _accumulate(graph, seeds, params, [params.start_iter], threads, backend)
    return CpiResult(scores=sums[0], iterations_run=iterations, converged=converged, residual_l1=residual)


def cpi_segments(
    graph: Graph,
    seeds: SeedSet,
    params: CpiParams,
    splits: Sequence[int],
    threads: int = 1,
    backend: Backend = "numpy",
) -> list[ScoreVector]:
    """
    Window sums between consecutive split points from a single pass.

    With ``splits=(S, T)`` and ``start_iter=0`` this returns the sums over ``[0, S-1]``, ``[S, T-1]`` and
    ``[T, terminal_iter]``.
    """
    boundaries = [params.start_iter, *splits]
    if any(b <= a for a, b in zip(boundaries[:-1], boundaries[1:])):
        raise ValueError(f"splits must be strictly increasing and greater than start_iter, got {list(splits)}")
    sums, _, _, _ = _accumulate(graph, seeds, params, boundaries, threads, backend)
    return sums


def exact_rwr(
    graph: Graph,
    seed: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    threads: int = 1,
    backend: Backend = "numpy",
) -> ScoreVector:
    """RWR scores for a single seed, i.e. the full CPI window ``[0, inf)``."""
    params = CpiParams(restart_prob=c, tolerance=tolerance)
    return cpi_run(graph, SeedSet.single(seed, graph.node_count), params, threads=threads, backend=backend).scores


def pagerank(
    graph: Graph,
    c: float = 0.15,
    tolerance: float = 1e-9,
    start_iter: int = 0,
    terminal_iter: int | None = None,
    threads: int = 1,
    backend: Backend = "numpy",
) -> CpiResult:
    """PageRank as CPI with every node as seed, over the given window."""
    params = CpiParams(restart_prob=c, tolerance=tolerance, start_iter=start_iter, terminal_iter=terminal_iter)
    return cpi_run(graph, SeedSet.all_nodes(graph.node_count), params, threads=threads, backend=backend)
