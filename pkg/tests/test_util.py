# Copyright (c) NXAI GmbH.

import numpy as np
import pandas as pd
import pytest

from tparwr.config import Settings
from tparwr.graph import Graph, generate_random_graph
from tparwr.util import log_result, measure_time, sample_seeds


def test_sample_seeds_is_reproducible():
    graph = generate_random_graph(100, 300, rng_seed=61)
    seeds = sample_seeds(graph, 30, rng_seed=0)

    assert len(seeds) == 30
    assert len(set(seeds.tolist())) == 30
    assert np.all(graph.has_external_out_edge[seeds])
    assert np.array_equal(seeds, sample_seeds(graph, 30, rng_seed=0))


def test_sample_seeds_small_pool(path_graph):
    assert list(sample_seeds(path_graph, 10, rng_seed=0)) == [0, 1, 2]

    with pytest.raises(ValueError):
        sample_seeds(Graph.from_edges([0], [0], 1), 1, rng_seed=0)
    with pytest.raises(ValueError):
        sample_seeds(path_graph, 0, rng_seed=0)


def test_measure_time():
    out, runtime = measure_time(lambda: sum(range(1000)), name="sum", repeats=3)

    assert out == 499500
    assert runtime >= 0.0


def test_log_result_appends(tmp_path):
    path = tmp_path / "results.csv"
    log_result(path, {"n": 10, "time": 1.5})
    log_result(path, {"n": 20, "time": 2.5})

    frame = pd.read_csv(path)
    assert list(frame["n"]) == [10, 20]


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("TPARWR_RESTART_PROB", "0.3")
    monkeypatch.setenv("TPARWR_BACKEND", "torch")
    settings = Settings()

    assert settings.restart_prob == 0.3
    assert settings.backend == "torch"
    assert settings.family_end == 5
    assert settings.top_k == (100, 500, 1000)
