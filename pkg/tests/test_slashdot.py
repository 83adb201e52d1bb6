# Copyright (c) NXAI GmbH.

import os

import numpy as np
import pytest

from tparwr.analysis import block_structure_comparison, column_difference_profile
from tparwr.cpi import exact_rwr
from tparwr.graph import generate_random_graph, load_edge_list
from tparwr.metrics import bound_report, l1_error, recall_at_k, summarize_reports
from tparwr.tpa import exact_parts, neighbor_scale_factor, preprocess, query, query_na
from tparwr.util import measure_time, sample_seeds

SLASHDOT_PATH = os.environ.get("TPARWR_SLASHDOT_PATH")

pytestmark = pytest.mark.skipif(not SLASHDOT_PATH, reason="Set TPARWR_SLASHDOT_PATH to the Slashdot edge list.")

C = 0.15
EPSILON = 1e-9


@pytest.fixture(scope="module")
def slashdot():
    graph, _ = load_edge_list(SLASHDOT_PATH)
    return graph


@pytest.fixture(scope="module")
def seeds(slashdot):
    return [int(s) for s in sample_seeds(slashdot, 30, rng_seed=0)]


@pytest.fixture(scope="module")
def artifact(slashdot):
    return preprocess(slashdot, C, EPSILON, 15)


@pytest.fixture(scope="module")
def reports(slashdot, seeds, artifact):
    return [bound_report(slashdot, seed, 5, 15, C, EPSILON, artifact=artifact) for seed in seeds]


def test_stranger_norm(artifact):
    assert artifact.stranger_scores.sum() == pytest.approx(0.85**15, abs=EPSILON / C)


def test_error_ratios(reports):
    summary = summarize_reports(reports).iloc[0]

    assert summary["total_bound_mean"] == pytest.approx(0.8874, abs=1e-4)
    assert 0.02 <= summary["total_ratio_mean"] <= 0.12
    assert 0.25 <= summary["neighbor_ratio_mean"] <= 0.70
    assert 0.25 <= summary["stranger_ratio_mean"] <= 0.75


def test_recall(reports):
    summary = summarize_reports(reports).iloc[0]

    for k in (100, 500, 1000):
        assert summary[f"recall@{k}_mean"] >= 0.95


def test_stranger_term_helps_ranking(slashdot, seeds, artifact):
    with_stranger, without_stranger = [], []
    for seed in seeds:
        exact = exact_rwr(slashdot, seed, C, EPSILON)
        approx = query(slashdot, artifact, seed, 5)
        ablated = query_na(slashdot, seed, 5, 15, C, EPSILON)
        with_stranger.append(recall_at_k(exact, approx, 100))
        without_stranger.append(recall_at_k(exact, ablated, 100))
        assert l1_error(approx, ablated) == pytest.approx(0.85**15, abs=EPSILON / C)

    assert np.mean(with_stranger) >= np.mean(without_stranger)


def test_block_structure(slashdot, seeds):
    comparison = block_structure_comparison(slashdot, seeds, 5, C, EPSILON, rng_seed=0)

    assert comparison.graph_stat < comparison.random_stat


@pytest.mark.filterwarnings("ignore:Column statistics estimated:UserWarning")
def test_column_structure(slashdot, seeds):
    profiles = [column_difference_profile(slashdot, seed, [1, 7], sample_size=1000, rng_seed=0) for seed in seeds]
    first = np.mean([profile[0].c_i for profile in profiles]), np.mean([profile[0].mean_nnz for profile in profiles])
    last = np.mean([profile[1].c_i for profile in profiles]), np.mean([profile[1].mean_nnz for profile in profiles])

    assert last[0] < first[0]
    assert last[1] > first[1]


def _mean_errors(graph, seeds, family_end, stranger_start):
    artifact = preprocess(graph, C, EPSILON, stranger_start)
    total, neighbor, stranger, online = [], [], [], []
    for seed in seeds:
        family, exact_neighbor, exact_stranger = exact_parts(graph, seed, family_end, stranger_start, C, EPSILON)
        approx, runtime = measure_time(lambda: query(graph, artifact, seed, family_end), name="query")
        total.append(l1_error(family + exact_neighbor + exact_stranger, approx))
        neighbor.append(l1_error(exact_neighbor, neighbor_scale_factor(C, family_end, stranger_start) * family))
        stranger.append(l1_error(exact_stranger, artifact.stranger_scores))
        online.append(runtime)
    return np.mean(total), np.mean(neighbor), np.mean(stranger), np.mean(online)


def test_family_end_tradeoff(slashdot, seeds):
    short_total, _, _, short_time = _mean_errors(slashdot, seeds, 2, 10)
    long_total, _, _, long_time = _mean_errors(slashdot, seeds, 7, 10)

    assert long_total < short_total
    assert long_time > short_time


def test_stranger_start_tradeoff(slashdot, seeds):
    _, early_neighbor, early_stranger, _ = _mean_errors(slashdot, seeds, 5, 6)
    _, late_neighbor, late_stranger, _ = _mean_errors(slashdot, seeds, 5, 20)

    assert late_stranger < early_stranger
    assert late_neighbor > early_neighbor


def test_online_speedup(slashdot, seeds, artifact):
    online = [measure_time(lambda: query(slashdot, artifact, seed, 5), name="query")[1] for seed in seeds]
    exact = [measure_time(lambda: exact_rwr(slashdot, seed, C, EPSILON), name="exact")[1] for seed in seeds]

    assert np.mean(exact) >= 5 * np.mean(online)


def test_stranger_term_lowers_error(reports):
    summary = summarize_reports(reports).iloc[0]

    assert summary["total_error_mean"] < summary["no_stranger_error_mean"]
    assert summary["spearman_mean"] > summary["no_stranger_spearman_mean"]


def test_neighbor_term_prefers_real_graphs(slashdot):
    random = generate_random_graph(slashdot.node_count, slashdot.edge_count, rng_seed=0)
    errors = []
    for graph in (slashdot, random):
        artifact = preprocess(graph, C, EPSILON, 15)
        seeds = [int(s) for s in sample_seeds(graph, 30, rng_seed=0)]
        reports = [bound_report(graph, s, 5, 15, C, EPSILON, artifact) for s in seeds]
        errors.append(np.mean([report.no_stranger_l1_error for report in reports]))

    assert errors[0] < errors[1]
