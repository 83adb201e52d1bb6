# Copyright (c) NXAI GmbH.

import numpy as np
import pytest

from tparwr.graph import Graph, generate_block_graph, generate_random_graph


def _complete_graph(node_count: int, self_loops: bool = False) -> Graph:
    src, dst = np.meshgrid(np.arange(node_count), np.arange(node_count), indexing="ij")
    keep = np.ones_like(src, dtype=bool) if self_loops else src != dst
    return Graph.from_edges(src[keep], dst[keep], node_count)


@pytest.fixture
def complete_graph():
    return _complete_graph


@pytest.fixture
def single_node_graph():
    return Graph.from_edges([0], [0], 1)


@pytest.fixture
def path_graph():
    # 0 -> 1 -> 2 -> 3, the sink gets a self-loop
    return Graph.from_edges([0, 1, 2], [1, 2, 3], 4)


@pytest.fixture
def random_graphs():
    """Factory of small random graphs with a mix of densities."""

    def make(count: int, rng_seed: int = 0, max_nodes: int = 50, dangling_policy: str = "self_loop"):
        rng = np.random.default_rng(rng_seed)
        graphs = []
        for _ in range(count):
            n = int(rng.integers(2, max_nodes + 1))
            m = int(rng.integers(1, min(n * (n - 1), 4 * n) + 1))
            graphs.append(generate_random_graph(n, m, int(rng.integers(1 << 31)), dangling_policy=dangling_policy))
        return graphs

    return make


@pytest.fixture
def block_graph():
    return generate_block_graph(100, 5, 600, intra_fraction=0.95, rng_seed=7)


@pytest.fixture
def dense_rwr():
    """Reference RWR by solving ``(I - (1 - c) A^T) r = c q`` on the dense transition matrix."""

    def solve(graph: Graph, seed: int, c: float) -> np.ndarray:
        n = graph.node_count
        q = np.zeros(n)
        q[seed] = 1.0
        return np.linalg.solve(np.eye(n) - (1.0 - c) * graph.to_dense_transition().T, c * q)

    return solve
