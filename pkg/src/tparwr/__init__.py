# Copyright (c) NXAI GmbH.

from .cpi import CpiParams, CpiResult, SeedSet, cpi_run, cpi_segments, exact_rwr, pagerank
from .graph import (
    DanglingPolicy,
    Graph,
    NodeIdMap,
    dump_edge_list,
    generate_block_graph,
    generate_random_graph,
    load_edge_list,
    propagation_sweep,
    stochastic_sweep,
)
from .metrics import ErrorReport, bound_report, l1_error, recall_at_k, spearman
from .persistence import load_artifact, save_artifact
from .tpa import StrangerArtifact, TpaModel, TpaParams, neighbor_scale_factor, preprocess, query, query_na

__all__ = [
    "CpiParams",
    "CpiResult",
    "SeedSet",
    "cpi_run",
    "cpi_segments",
    "exact_rwr",
    "pagerank",
    "DanglingPolicy",
    "Graph",
    "NodeIdMap",
    "dump_edge_list",
    "generate_block_graph",
    "generate_random_graph",
    "load_edge_list",
    "propagation_sweep",
    "stochastic_sweep",
    "ErrorReport",
    "bound_report",
    "l1_error",
    "recall_at_k",
    "spearman",
    "load_artifact",
    "save_artifact",
    "StrangerArtifact",
    "TpaModel",
    "TpaParams",
    "neighbor_scale_factor",
    "preprocess",
    "query",
    "query_na",
]
