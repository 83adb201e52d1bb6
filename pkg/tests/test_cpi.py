# Copyright (c) NXAI GmbH.

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tparwr.cpi import CpiParams, SeedSet, cpi_run, cpi_segments, exact_rwr, pagerank
from tparwr.graph import Graph, generate_random_graph, propagation_sweep


@pytest.mark.parametrize("c", [0.05, 0.15, 0.5])
@pytest.mark.parametrize("policy", ["self_loop", "uniform", "drop"])
def test_exact_rwr_matches_linear_solve(random_graphs, dense_rwr, c, policy):
    for graph in random_graphs(50, rng_seed=11, dangling_policy=policy):
        seed = graph.node_count // 2
        assert_allclose(exact_rwr(graph, seed, c, tolerance=1e-12), dense_rwr(graph, seed, c), atol=1e-8)


def test_iteration_count_and_convergence():
    graph = generate_random_graph(60, 300, rng_seed=1)
    result = cpi_run(graph, SeedSet.single(3, 60), CpiParams())

    assert result.converged
    assert result.iterations_run == 116
    assert result.residual_l1 < 1e-9
    assert result.scores.sum() == pytest.approx(1.0, abs=1e-8)


def test_interim_norms(random_graphs):
    c = 0.15
    for graph in random_graphs(20, rng_seed=5):
        x = c * SeedSet.single(0, graph.node_count).seed_vector()
        for i in range(1, 51):
            x = propagation_sweep(graph, x, c)
            assert np.abs(x).sum() == pytest.approx(c * (1 - c) ** i, abs=1e-12)


def test_window_edges(path_graph):
    seeds = SeedSet.single(0, 4)

    only_first = cpi_run(path_graph, seeds, CpiParams(start_iter=0, terminal_iter=0))
    assert_allclose(only_first.scores, [0.15, 0.0, 0.0, 0.0])
    assert only_first.iterations_run == 0
    assert not only_first.converged

    # 0.15 * 0.85^2 reaches node 2 at the second sweep
    second = cpi_run(path_graph, seeds, CpiParams(start_iter=2, terminal_iter=2))
    assert_allclose(second.scores, [0.0, 0.0, 0.15 * 0.85**2, 0.0])


def test_family_and_neighbor_norms(random_graphs):
    c, S, T = 0.15, 5, 10
    for graph in random_graphs(20, rng_seed=6):
        seeds = SeedSet.single(1, graph.node_count)
        family = cpi_run(graph, seeds, CpiParams(restart_prob=c, terminal_iter=S - 1)).scores
        neighbor = cpi_run(graph, seeds, CpiParams(restart_prob=c, start_iter=S, terminal_iter=T - 1)).scores

        assert family.sum() == pytest.approx(1 - (1 - c) ** S, abs=1e-9)
        assert neighbor.sum() == pytest.approx((1 - c) ** S - (1 - c) ** T, abs=1e-9)


def test_segments_match_separate_windows(random_graphs):
    for graph in random_graphs(10, rng_seed=7, dangling_policy="uniform"):
        seeds = SeedSet.single(0, graph.node_count)
        params = CpiParams(restart_prob=0.2)
        family, neighbor, stranger = cpi_segments(graph, seeds, params, splits=(4, 9))

        assert_allclose(family, cpi_run(graph, seeds, CpiParams(restart_prob=0.2, terminal_iter=3)).scores, atol=1e-12)
        windowed = CpiParams(restart_prob=0.2, start_iter=4, terminal_iter=8)
        assert_allclose(neighbor, cpi_run(graph, seeds, windowed).scores, atol=1e-12)
        assert_allclose(stranger, cpi_run(graph, seeds, CpiParams(restart_prob=0.2, start_iter=9)).scores, atol=1e-12)
        assert_allclose(family + neighbor + stranger, exact_rwr(graph, 0, 0.2), atol=1e-9)


def test_segments_validation(path_graph):
    with pytest.raises(ValueError):
        cpi_segments(path_graph, SeedSet.single(0, 4), CpiParams(), splits=(5, 5))
    with pytest.raises(ValueError):
        cpi_segments(path_graph, SeedSet.single(0, 4), CpiParams(start_iter=3), splits=(2,))


def test_single_self_loop(single_node_graph):
    assert exact_rwr(single_node_graph, 0)[0] == pytest.approx(1.0, abs=1e-8)


def test_two_cycle():
    graph = Graph.from_edges([0, 1], [1, 0], 2)

    assert_allclose(exact_rwr(graph, 0), [1 / 1.85, 0.85 / 1.85], atol=1e-8)


def test_pagerank_on_complete_graph(complete_graph):
    assert_allclose(pagerank(complete_graph(3)).scores, [1 / 3] * 3, atol=1e-8)


def test_windows_add_up_after_start(random_graphs):
    for graph in random_graphs(10, rng_seed=11, dangling_policy="uniform"):
        seeds = SeedSet.single(0, graph.node_count)

        def window(start, end):
            params = CpiParams(tolerance=1e-12, start_iter=start, terminal_iter=end)
            return cpi_run(graph, seeds, params).scores

        assert_allclose(window(2, 6) + window(7, 20), window(2, 20), atol=1e-12)


def test_scores_never_decrease_across_iterations(random_graphs):
    for graph in random_graphs(5, rng_seed=12):
        seeds = SeedSet.single(0, graph.node_count)
        previous = np.zeros(graph.node_count)
        for end in range(0, 25):
            scores = cpi_run(graph, seeds, CpiParams(tolerance=1e-12, terminal_iter=end)).scores
            assert np.all(scores >= previous)
            previous = scores


def test_drop_policy_leaks_mass():
    graph = Graph.from_edges([0, 1], [1, 2], 3, dangling_policy="drop")
    scores = exact_rwr(graph, 0)

    assert_allclose(scores, [0.15, 0.15 * 0.85, 0.15 * 0.85**2], atol=1e-15)
    assert scores.sum() < 1.0


def test_pagerank_sums_to_one():
    graph = generate_random_graph(80, 400, rng_seed=3, dangling_policy="uniform")
    result = pagerank(graph)

    assert result.converged
    assert result.scores.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(result.scores > 0)


def test_seed_set():
    assert_allclose(SeedSet.of([0, 2], 4).seed_vector(), [0.5, 0.0, 0.5, 0.0])
    assert SeedSet.all_nodes(3).seeds == (0, 1, 2)

    with pytest.raises(ValueError):
        SeedSet(seeds=(), node_count=3)
    with pytest.raises(ValueError):
        SeedSet.of([1, 1], 3)
    with pytest.raises(ValueError):
        SeedSet.single(3, 3)


def test_seed_set_must_match_graph(path_graph):
    with pytest.raises(ValueError):
        cpi_run(path_graph, SeedSet.single(0, 5), CpiParams())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"restart_prob": 0.0},
        {"restart_prob": 1.0},
        {"tolerance": 0.0},
        {"start_iter": -1},
        {"start_iter": 3, "terminal_iter": 2},
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        CpiParams(**kwargs)


def test_threads_agree():
    graph = generate_random_graph(400, 2400, rng_seed=4)
    reference = exact_rwr(graph, 5)

    assert_allclose(exact_rwr(graph, 5, threads=4), reference, atol=1e-14)
