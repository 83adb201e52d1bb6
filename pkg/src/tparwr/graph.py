# Copyright (c) NXAI GmbH.

import hashlib
import logging
import sys
from dataclasses import dataclass
from functools import cached_property
from os import PathLike
from typing import Literal

import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed
from scipy import sparse as sp

from .errors import EmptyGraphError, GraphFormatError, InfeasibleGraphError

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - backport of enum.StrEnum for Python 3.10
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        __format__ = str.__format__

logger = logging.getLogger(__name__)

ScoreVector = npt.NDArray[np.float64]
Backend = Literal["numpy", "torch"]

_MAX_LABEL = int(np.iinfo(np.int64).max)


class DanglingPolicy(StrEnum):
    SELF_LOOP = "self_loop"
    UNIFORM = "uniform"
    DROP = "drop"


@dataclass(frozen=True)
class NodeIdMap:
    """Bijection between raw edge-list labels and dense ids in ``[0, n)``."""

    internal_to_external: npt.NDArray[np.int64]

    @cached_property
    def external_to_internal(self) -> dict[int, int]:
        return {int(label): idx for idx, label in enumerate(self.internal_to_external)}

    def __len__(self) -> int:
        return len(self.internal_to_external)

    def to_internal(self, label: int) -> int:
        try:
            return self.external_to_internal[int(label)]
        except KeyError:
            raise ValueError(f"Unknown node label {label}") from None

    def to_external(self, ids: npt.ArrayLike) -> npt.NDArray[np.int64]:
        return self.internal_to_external[np.asarray(ids, dtype=np.int64)]

    @classmethod
    def identity(cls, node_count: int) -> "NodeIdMap":
        return cls(internal_to_external=np.arange(node_count, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Immutable directed graph stored as CSR over out-edges.

    The row-normalized adjacency matrix is never materialized densely; sweeps divide by the out-degree through
    the cached sparse transition matrix. Nodes with zero out-degree are handled according to ``dangling_policy``.
    """

    node_count: int
    out_offsets: npt.NDArray[np.int64]
    out_targets: npt.NDArray[np.int64]
    dangling_policy: DanglingPolicy = DanglingPolicy.SELF_LOOP

    def __post_init__(self) -> None:
        n = self.node_count
        if n < 1:
            raise ValueError(f"node_count must be >= 1, got {n}")

        offsets = np.ascontiguousarray(self.out_offsets, dtype=np.int64)
        targets = np.ascontiguousarray(self.out_targets, dtype=np.int64)
        if offsets.shape != (n + 1,):
            raise ValueError(f"out_offsets must have length n+1={n + 1}, got {offsets.shape}")
        if offsets[0] != 0 or offsets[-1] != targets.shape[0]:
            raise ValueError("out_offsets must start at 0 and end at the edge count")
        if np.any(np.diff(offsets) < 0):
            raise ValueError("out_offsets must be non-decreasing")
        if targets.size and (targets.min() < 0 or targets.max() >= n):
            raise ValueError(f"out_targets must lie in [0, {n})")

        # targets strictly increase inside every row slice
        if targets.size > 1:
            increasing = np.diff(targets) > 0
            row_start = np.zeros(targets.size, dtype=bool)
            row_start[offsets[:-1][offsets[:-1] < targets.size]] = True
            if not np.all(increasing | row_start[1:]):
                raise ValueError("out_targets must be sorted and unique within each node")

        policy = DanglingPolicy(self.dangling_policy)
        if policy is DanglingPolicy.SELF_LOOP and np.any(np.diff(offsets) == 0):
            raise ValueError("self_loop policy requires every node to have an out-edge")

        offsets.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "out_offsets", offsets)
        object.__setattr__(self, "out_targets", targets)
        object.__setattr__(self, "dangling_policy", policy)

    @classmethod
    def from_edges(
        cls,
        src: npt.ArrayLike,
        dst: npt.ArrayLike,
        node_count: int,
        dangling_policy: DanglingPolicy | str = DanglingPolicy.SELF_LOOP,
    ) -> "Graph":
        """Build a graph from id arrays: duplicates removed, rows sorted, dangling policy applied."""
        n = node_count
        policy = DanglingPolicy(dangling_policy)
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError(f"src and dst must have equal length, got {src.size} and {dst.size}")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError(f"Edge endpoints must lie in [0, {n})")

        keys = np.unique(src * n + dst)
        if policy is DanglingPolicy.SELF_LOOP:
            degree = np.bincount(keys // n, minlength=n)
            sinks = np.flatnonzero(degree == 0)
            if sinks.size:
                keys = np.union1d(keys, sinks * n + sinks)

        src, dst = np.divmod(keys, n)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(node_count=n, out_offsets=offsets, out_targets=dst, dangling_policy=policy)

    @property
    def edge_count(self) -> int:
        return int(self.out_offsets[-1])

    @cached_property
    def out_degree(self) -> npt.NDArray[np.int64]:
        degree = np.diff(self.out_offsets)
        degree.setflags(write=False)
        return degree

    @cached_property
    def sources(self) -> npt.NDArray[np.int64]:
        """Source id of every stored edge, aligned with ``out_targets``."""
        return np.repeat(np.arange(self.node_count, dtype=np.int64), self.out_degree)

    @cached_property
    def dangling_mask(self) -> npt.NDArray[np.bool_]:
        return self.out_degree == 0

    @cached_property
    def has_external_out_edge(self) -> npt.NDArray[np.bool_]:
        """Nodes with at least one out-edge to a different node."""
        external = self.out_targets != self.sources
        return np.bincount(self.sources[external], minlength=self.node_count) > 0

    @property
    def is_stochastic(self) -> bool:
        return self.dangling_policy is not DanglingPolicy.DROP or not np.any(self.dangling_mask)

    @cached_property
    def fingerprint(self) -> int:
        digest = hashlib.blake2b(digest_size=8)
        digest.update(np.array([self.node_count, self.edge_count], dtype="<i8").tobytes())
        digest.update(self.out_offsets.astype("<i8").tobytes())
        digest.update(self.out_targets.astype("<i8").tobytes())
        digest.update(self.dangling_policy.value.encode("utf-8"))
        return int.from_bytes(digest.digest(), "little")

    @cached_property
    def transition(self) -> sp.csr_matrix:
        """Row-normalized adjacency matrix with empty rows for dangling nodes."""
        degree = self.out_degree
        inv_degree = np.divide(1.0, degree, out=np.zeros(self.node_count), where=degree > 0)
        return sp.csr_matrix(
            (inv_degree[self.sources], self.out_targets, self.out_offsets),
            shape=(self.node_count, self.node_count),
        )

    @cached_property
    def transition_t(self) -> sp.csr_matrix:
        return self.transition.T.tocsr()

    @cached_property
    def _source_blocks(self) -> dict[int, list[tuple[int, int, sp.csr_matrix]]]:
        return {}

    def source_blocks(self, parts: int) -> list[tuple[int, int, sp.csr_matrix]]:
        """Split the source nodes into ``parts`` ranges of similar edge count, each with its transposed slice."""
        blocks = self._source_blocks.get(parts)
        if blocks is None:
            cuts = np.searchsorted(self.out_offsets, np.linspace(0, self.edge_count, parts + 1), side="left")
            cuts[0], cuts[-1] = 0, self.node_count
            cuts = np.unique(np.minimum(cuts, self.node_count))
            blocks = [
                (int(lo), int(hi), self.transition[lo:hi].T.tocsr()) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo
            ]
            self._source_blocks[parts] = blocks
        return blocks

    @cached_property
    def torch_transition_t(self):
        import torch

        transposed = self.transition_t
        return torch.sparse_csr_tensor(
            torch.from_numpy(transposed.indptr.astype(np.int64)),
            torch.from_numpy(transposed.indices.astype(np.int64)),
            torch.from_numpy(transposed.data),
            size=transposed.shape,
            dtype=torch.float64,
        )

    def to_dense_transition(self) -> npt.NDArray[np.float64]:
        """Dense row-normalized adjacency (dangling rows uniform under the uniform policy); small graphs only."""
        dense = self.transition.toarray()
        if self.dangling_policy is DanglingPolicy.UNIFORM:
            dense[self.dangling_mask] = 1.0 / self.node_count
        return dense

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.dangling_policy is other.dangling_policy
            and np.array_equal(self.out_offsets, other.out_offsets)
            and np.array_equal(self.out_targets, other.out_targets)
        )

    def __hash__(self) -> int:
        return self.fingerprint

    def __repr__(self) -> str:
        return f"Graph(n={self.node_count}, m={self.edge_count}, dangling_policy={self.dangling_policy.value})"


def load_edge_list(
    path: str | PathLike, dangling_policy: DanglingPolicy | str = DanglingPolicy.SELF_LOOP
) -> tuple[Graph, NodeIdMap]:
    """Loads a whitespace separated edge list.

    Args:
        path (str | PathLike): UTF-8 text file with one ``src dst`` pair per line. Lines starting with ``#`` and
            blank lines are skipped; columns after the second are ignored.
        dangling_policy (DanglingPolicy | str): How zero out-degree nodes are treated. Default: self_loop

    Returns:
        tuple[Graph, NodeIdMap]: The graph over dense ids and the mapping back to the raw labels.

    Raises:
        GraphFormatError: A line has fewer than two tokens, a non-integer, a negative label or one beyond int64.
        EmptyGraphError: The file contains no edges.
    """
    labels: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) < 2:
                raise GraphFormatError(str(path), line_number, stripped, "expected 'src dst'")
            try:
                src, dst = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise GraphFormatError(str(path), line_number, stripped, "non-integer node label") from None
            if src < 0 or dst < 0:
                raise GraphFormatError(str(path), line_number, stripped, "negative node label")
            if max(src, dst) > _MAX_LABEL:
                raise GraphFormatError(str(path), line_number, stripped, "node label exceeds int64")
            labels.append(src)
            labels.append(dst)

    if not labels:
        raise EmptyGraphError(f"Edge list {path} contains no edges")

    raw = np.asarray(labels, dtype=np.int64)
    external, dense = np.unique(raw, return_inverse=True)
    graph = Graph.from_edges(dense[0::2], dense[1::2], len(external), dangling_policy)
    logger.info(
        "Loaded %s: n=%d m=%d dangling=%d policy=%s",
        path,
        graph.node_count,
        graph.edge_count,
        int(np.count_nonzero(np.bincount(dense[0::2], minlength=len(external)) == 0)),
        graph.dangling_policy.value,
    )
    return graph, NodeIdMap(internal_to_external=external)


def dump_edge_list(graph: Graph, path: str | PathLike) -> None:
    """Writes the graph as an edge list over internal ids, in CSR order."""
    edges = np.column_stack([graph.sources, graph.out_targets])
    header = f"n={graph.node_count} m={graph.edge_count} dangling_policy={graph.dangling_policy.value}"
    np.savetxt(path, edges, fmt="%d", header=header, comments="# ", encoding="utf-8")


def _decode_pairs(codes: npt.NDArray[np.int64], node_count: int) -> tuple[np.ndarray, np.ndarray]:
    # pair codes enumerate the n*(n-1) ordered pairs without self-loops
    src, rest = np.divmod(codes, node_count - 1)
    return src, rest + (rest >= src)


def _sample_distinct(rng: np.random.Generator, population: int, size: int) -> npt.NDArray[np.int64]:
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < size:
        draw = rng.integers(0, population, size=max(2 * (size - chosen.size), 16), dtype=np.int64)
        merged = np.concatenate([chosen, draw])
        _, first = np.unique(merged, return_index=True)
        chosen = merged[np.sort(first)]
    return chosen[:size]


def generate_random_graph(
    node_count: int,
    edge_count: int,
    rng_seed: int,
    dangling_policy: DanglingPolicy | str = DanglingPolicy.SELF_LOOP,
) -> Graph:
    """
    Sample ``edge_count`` distinct directed edges uniformly, without self-loops.

    Sparse requests use rejection sampling over pair codes; when more than a quarter of all n^2 pairs are
    requested the pair codes are shuffled instead. The dangling policy is applied afterwards, so under
    ``self_loop`` the stored edge count can exceed ``edge_count``.
    """
    n = node_count
    if n < 1:
        raise InfeasibleGraphError(f"node_count must be >= 1, got {n}")
    population = n * (n - 1)
    if edge_count < 0 or edge_count > population:
        raise InfeasibleGraphError(f"Cannot place {edge_count} distinct edges on {n} nodes (max {population})")

    if edge_count == 0:
        return Graph.from_edges([], [], n, dangling_policy)

    rng = np.random.default_rng(rng_seed)
    if edge_count > n * n / 4:
        codes = rng.permutation(population)[:edge_count]
    else:
        codes = _sample_distinct(rng, population, edge_count)

    src, dst = _decode_pairs(codes, n)
    return Graph.from_edges(src, dst, n, dangling_policy)


def generate_block_graph(
    node_count: int,
    block_count: int,
    edge_count: int,
    intra_fraction: float = 0.9,
    rng_seed: int = 0,
    dangling_policy: DanglingPolicy | str = DanglingPolicy.SELF_LOOP,
) -> Graph:
    """
    Planted-partition graph: ``block_count`` contiguous blocks of near-equal size.

    Each candidate edge lands inside a block with probability ``intra_fraction`` and between two uniformly chosen
    distinct nodes otherwise. Candidates are drawn until ``edge_count`` distinct edges exist.
    """
    n = node_count
    if block_count < 1 or n < 2 * block_count:
        raise InfeasibleGraphError(f"Need at least 2 nodes per block, got n={n} blocks={block_count}")
    if not 0.0 <= intra_fraction <= 1.0:
        raise ValueError(f"intra_fraction must be in [0, 1], got {intra_fraction}")

    bounds = np.linspace(0, n, block_count + 1).astype(np.int64)
    sizes = np.diff(bounds)
    intra_capacity = int(np.sum(sizes * (sizes - 1)))
    if edge_count < 0 or edge_count > n * (n - 1) or edge_count * intra_fraction > intra_capacity:
        raise InfeasibleGraphError(f"Cannot place {edge_count} edges in {block_count} blocks over {n} nodes")

    rng = np.random.default_rng(rng_seed)
    weights = sizes * (sizes - 1) / intra_capacity
    chosen = np.empty(0, dtype=np.int64)
    for _ in range(256):
        if chosen.size >= edge_count:
            break
        batch = max(2 * (edge_count - chosen.size), 16)
        inside = rng.random(batch) < intra_fraction

        block = rng.choice(block_count, size=batch, p=weights)
        size = sizes[block]
        u = rng.integers(0, size)
        v = rng.integers(0, size - 1)
        v = v + (v >= u)
        local_src, local_dst = bounds[block] + u, bounds[block] + v

        global_src, global_dst = _decode_pairs(rng.integers(0, n * (n - 1), size=batch, dtype=np.int64), n)
        src = np.where(inside, local_src, global_src)
        dst = np.where(inside, local_dst, global_dst)

        merged = np.concatenate([chosen, src * n + dst])
        _, first = np.unique(merged, return_index=True)
        chosen = merged[np.sort(first)]

    if chosen.size < edge_count:
        raise InfeasibleGraphError(f"Could not sample {edge_count} distinct block edges")

    src, dst = np.divmod(chosen[:edge_count], n)
    return Graph.from_edges(src, dst, n, dangling_policy)


def _check_vector(graph: Graph, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != graph.node_count:
        raise ValueError(f"Score vector length mismatch: expected {graph.node_count} rows, got shape {x.shape}")
    return x


def _propagate(graph: Graph, x: npt.NDArray[np.float64], damping: float, threads: int, backend: Backend) -> ScoreVector:
    if backend == "torch":
        import torch

        block = torch.from_numpy(np.ascontiguousarray(x).reshape(graph.node_count, -1))
        y = (graph.torch_transition_t @ block).numpy().reshape(x.shape)
    elif backend == "numpy":
        if threads <= 1:
            y = graph.transition_t @ x
        else:
            blocks = graph.source_blocks(threads)
            partials = Parallel(n_jobs=threads, prefer="threads")(
                delayed(transposed.dot)(x[lo:hi]) for lo, hi, transposed in blocks
            )
            # merge thread-private accumulators in block order
            y = partials[0].copy()
            for partial in partials[1:]:
                y += partial
    else:
        raise ValueError(f"Invalid backend: {backend}")

    if graph.dangling_policy is DanglingPolicy.UNIFORM and np.any(graph.dangling_mask):
        y = y + x[graph.dangling_mask].sum(axis=0) / graph.node_count

    return damping * y


def propagation_sweep(
    graph: Graph, x: npt.ArrayLike, c: float, threads: int = 1, backend: Backend = "numpy"
) -> ScoreVector:
    """One damped propagation step ``(1 - c) * A_norm^T x``.

    Args:
        graph (Graph): Graph to propagate over.
        x (ArrayLike): Score vector of length n, or an ``(n, b)`` block of column vectors.
        c (float): Restart probability in (0, 1).
        threads (int): Source-range parallelism; 1 is the bitwise reference. Default: 1
        backend (numpy | torch): Sparse kernel. Default: numpy

    Returns:
        ScoreVector: Propagated scores with the same shape as ``x``.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"Restart probability must be in (0, 1), got {c}")
    return _propagate(graph, _check_vector(graph, x), 1.0 - c, threads, backend)


def stochastic_sweep(graph: Graph, x: npt.ArrayLike, threads: int = 1, backend: Backend = "numpy") -> ScoreVector:
    """Undamped step ``A_norm^T x``; preserves L1 mass on stochastic graphs."""
    return _propagate(graph, _check_vector(graph, x), 1.0, threads, backend)
