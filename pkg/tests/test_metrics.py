# Copyright (c) NXAI GmbH.

import numpy as np
import pytest

from tparwr.cpi import exact_rwr
from tparwr.errors import UndefinedCorrelationError
from tparwr.graph import generate_random_graph
from tparwr.metrics import (
    ErrorReport,
    bound_report,
    format_error_table,
    l1_error,
    recall_at_k,
    spearman,
    summarize_reports,
    theoretical_bounds,
    top_k,
)
from tparwr.tpa import preprocess, query_na


@pytest.fixture
def graph():
    return generate_random_graph(60, 300, rng_seed=31)


def test_l1_error():
    assert l1_error([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert l1_error([1.0, 0.0], [0.0, 1.0]) == 2.0

    with pytest.raises(ValueError):
        l1_error([1.0, 0.0], [1.0])


def test_l1_error_triangle_inequality():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b, c = rng.normal(size=(3, 20))
        assert l1_error(a, c) <= l1_error(a, b) + l1_error(b, c) + 1e-12


def test_top_k_breaks_ties_by_node_id():
    assert list(top_k([1.0, 3.0, 3.0, 2.0, 3.0], 3)) == [1, 2, 4]
    assert list(top_k([0.5, 0.5, 0.5], 2)) == [0, 1]


def test_recall_at_k():
    v = np.random.default_rng(1).random(50)
    assert all(recall_at_k(v, v, k) == 1.0 for k in (1, 10, 50))
    assert recall_at_k([3, 2, 1, 0], [0, 1, 2, 3], 2) == 0.0
    assert recall_at_k([3, 2, 1, 0], [3, 0, 2, 1], 2) == 0.5

    with pytest.raises(ValueError):
        recall_at_k(v, v, 0)
    with pytest.raises(ValueError):
        recall_at_k(v, v, 51)


def test_spearman():
    v = np.random.default_rng(2).random(30)
    assert spearman(v, v) == pytest.approx(1.0)
    assert spearman(v, -v) == pytest.approx(-1.0)
    # average ranks: (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(np.corrcoef([1, 2.5, 2.5, 4], [1, 2, 3, 4])[0, 1])


def test_spearman_undefined():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        spearman([1.0], [1.0])


def test_spearman_null_distribution():
    rng = np.random.default_rng(3)
    values = [spearman(rng.permutation(1000), rng.permutation(1000)) for _ in range(200)]
    assert abs(np.mean(values)) < 0.1


def test_theoretical_bounds():
    neighbor, stranger, total = theoretical_bounds(0.15, 5, 15)

    assert neighbor == pytest.approx(0.7127, abs=1e-4)
    assert stranger == pytest.approx(0.1747, abs=1e-4)
    assert total == pytest.approx(0.8874, abs=1e-4)
    assert neighbor + stranger == pytest.approx(total, abs=1e-12)


def test_bound_report(graph):
    with pytest.warns(UserWarning, match="clipped"):
        report = bound_report(graph, 4, 5, 10, ks=(10, 100))
    neighbor_bound, stranger_bound, total_bound = theoretical_bounds(0.15, 5, 10)

    assert report.neighbor.theoretical_bound == pytest.approx(neighbor_bound, abs=1e-12)
    assert report.stranger.theoretical_bound == pytest.approx(stranger_bound, abs=1e-12)
    assert report.theoretical_bound == pytest.approx(total_bound, abs=1e-12)
    for part in (report.neighbor, report.stranger, report.total):
        assert 0.0 <= part.bound_ratio <= 1.0
        assert part.l1_error >= 0.0
    assert set(report.recall_at_k) == {10, 60}
    assert report.recall_at_k[60] == 1.0
    assert -1.0 <= report.spearman <= 1.0


def test_bound_report_reuses_artifact(graph):
    artifact = preprocess(graph, stranger_start=10)
    fresh = bound_report(graph, 7, 5, 10, ks=(5,))
    reused = bound_report(graph, 7, 5, 10, artifact=artifact, ks=(5,))

    assert reused.to_row() == fresh.to_row()

    with pytest.raises(ValueError):
        bound_report(graph, 7, 5, 12, artifact=artifact, ks=(5,))


def test_report_row_and_summary(graph):
    reports = [bound_report(graph, seed, 3, 8, ks=(5, 20)) for seed in (1, 2, 3)]
    row = reports[0].to_row()

    assert list(row)[:4] == ["seed", "S", "T", "c"]
    assert {"total_error", "total_bound", "total_ratio", "recall@5", "recall@20", "spearman"} <= set(row)

    summary = summarize_reports(reports)
    assert len(summary) == 1
    assert summary.loc[0, "num_seeds"] == 3
    assert summary.loc[0, "S"] == 3
    assert summary.loc[0, "total_error_mean"] == pytest.approx(np.mean([r.l1_error for r in reports]))
    assert summary.loc[0, "total_error_std"] == pytest.approx(np.std([r.l1_error for r in reports], ddof=1))


def test_summary_rejects_mixed_parameters(graph):
    reports = [bound_report(graph, 1, 3, 8, ks=(5,)), bound_report(graph, 1, 4, 8, ks=(5,))]

    with pytest.raises(ValueError):
        summarize_reports(reports)
    with pytest.raises(ValueError):
        summarize_reports([])


def test_format_error_table(graph):
    reports = [bound_report(graph, seed, 5, 10, ks=(5,)) for seed in (0, 1)]
    table = format_error_table(reports)

    for token in ("neighbor", "stranger", "total", "bound (A)", "ratio (B/A)", "recall@5", "spearman"):
        assert token in table
    assert isinstance(reports[0], ErrorReport)
    assert "TPA-NA l1 error" in table
    assert "TPA-NA recall@5" in table


def test_bound_report_without_stranger(graph):
    report = bound_report(graph, 4, 5, 10, ks=(10,))
    exact = exact_rwr(graph, 4)

    assert report.no_stranger_l1_error == pytest.approx(l1_error(exact, query_na(graph, 4, 5, 10)), abs=1e-9)
    # the dropped tail carries (1 - c)^T of the mass
    assert report.no_stranger_l1_error >= 0.85**10 - 1e-6
    assert set(report.no_stranger_recall_at_k) == {10}
    assert -1.0 <= report.no_stranger_spearman <= 1.0

    row = report.to_row()
    assert {"no_stranger_error", "no_stranger_recall@10", "no_stranger_spearman"} <= set(row)
    summary = summarize_reports([report])
    assert summary.loc[0, "no_stranger_error_mean"] == pytest.approx(report.no_stranger_l1_error)
