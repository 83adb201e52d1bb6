# Copyright (c) NXAI GmbH.

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.stats import spearmanr

from .errors import UndefinedCorrelationError
from .graph import Backend, Graph, ScoreVector
from .tpa import StrangerArtifact, TpaParams, exact_parts, neighbor_scale_factor, preprocess

logger = logging.getLogger(__name__)


def _pair(a: npt.ArrayLike, b: npt.ArrayLike) -> tuple[ScoreVector, ScoreVector]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"Score vector length mismatch: {a.shape} vs {b.shape}")
    return a, b


def l1_error(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    a, b = _pair(a, b)
    return float(np.abs(a - b).sum())


def top_k(scores: npt.ArrayLike, k: int) -> npt.NDArray[np.int64]:
    """Ids of the ``k`` highest scores; ties go to the smaller node id."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    # lexsort orders by the last key first
    return np.lexsort((np.arange(n), -scores))[:k]


def recall_at_k(exact: npt.ArrayLike, approx: npt.ArrayLike, k: int) -> float:
    exact, approx = _pair(exact, approx)
    hits = np.intersect1d(top_k(exact, k), top_k(approx, k), assume_unique=True)
    return hits.size / k


def spearman(exact: npt.ArrayLike, approx: npt.ArrayLike) -> float:
    """Spearman rank correlation with average ranks for ties.

    Raises:
        UndefinedCorrelationError: One of the vectors is constant, so its ranks have zero variance.
    """
    exact, approx = _pair(exact, approx)
    if exact.shape[0] < 2:
        raise ValueError(f"Spearman correlation needs at least 2 entries, got {exact.shape[0]}")
    if np.all(exact == exact[0]) or np.all(approx == approx[0]):
        raise UndefinedCorrelationError("Spearman correlation is undefined for a vector with all scores tied")
    rho, _ = spearmanr(exact, approx)
    return float(rho)


def theoretical_bounds(c: float, family_end: int, stranger_start: int) -> tuple[float, float, float]:
    """Closed-form L1 bounds of the neighbor, stranger and total approximation errors."""
    decay = 1.0 - c
    neighbor = 2.0 * decay**family_end - 2.0 * decay**stranger_start
    stranger = 2.0 * decay**stranger_start
    total = 2.0 * decay**family_end
    return neighbor, stranger, total


@dataclass(frozen=True)
class PartError:
    l1_error: float
    theoretical_bound: float
    bound_ratio: float

    @classmethod
    def of(cls, l1: float, bound: float) -> "PartError":
        return cls(l1_error=l1, theoretical_bound=bound, bound_ratio=l1 / bound if bound > 0 else 0.0)


@dataclass
class ErrorReport:
    seed: int
    family_end: int
    stranger_start: int
    restart_prob: float

    neighbor: PartError
    stranger: PartError
    total: PartError

    recall_at_k: dict[int, float] = field(default_factory=dict)
    spearman: float = math.nan

    # the same scores without the stranger part
    no_stranger_l1_error: float = math.nan
    no_stranger_recall_at_k: dict[int, float] = field(default_factory=dict)
    no_stranger_spearman: float = math.nan

    @property
    def l1_error(self) -> float:
        return self.total.l1_error

    @property
    def theoretical_bound(self) -> float:
        return self.total.theoretical_bound

    @property
    def bound_ratio(self) -> float:
        return self.total.bound_ratio

    def to_row(self) -> dict[str, float | int]:
        row: dict[str, float | int] = {
            "seed": self.seed,
            "S": self.family_end,
            "T": self.stranger_start,
            "c": self.restart_prob,
        }
        for name in ("neighbor", "stranger", "total"):
            part: PartError = getattr(self, name)
            row[f"{name}_bound"] = part.theoretical_bound
            row[f"{name}_error"] = part.l1_error
            row[f"{name}_ratio"] = part.bound_ratio
        for k, value in sorted(self.recall_at_k.items()):
            row[f"recall@{k}"] = value
        row["spearman"] = self.spearman
        row["no_stranger_error"] = self.no_stranger_l1_error
        for k, value in sorted(self.no_stranger_recall_at_k.items()):
            row[f"no_stranger_recall@{k}"] = value
        row["no_stranger_spearman"] = self.no_stranger_spearman
        return row


def _clip_ks(ks: Sequence[int], node_count: int) -> list[int]:
    clipped = []
    for k in ks:
        if k > node_count:
            warnings.warn(f"recall@{k} clipped to the node count {node_count}", UserWarning, stacklevel=3)
            k = node_count
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if k not in clipped:
            clipped.append(k)
    return clipped


def _spearman_or_nan(seed: int, exact: ScoreVector, approx: ScoreVector) -> float:
    try:
        return spearman(exact, approx)
    except (UndefinedCorrelationError, ValueError) as e:
        logger.warning("Seed %d: %s", seed, e)
        return math.nan


def bound_report(
    graph: Graph,
    seed: int,
    family_end: int,
    stranger_start: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    artifact: StrangerArtifact | None = None,
    ks: Sequence[int] = (100, 500, 1000),
    threads: int = 1,
    backend: Backend = "numpy",
) -> ErrorReport:
    """Compares the TPA approximation for one seed against its exact decomposition.

    Args:
        graph (Graph): Graph to evaluate on.
        seed (int): Internal id of the seed node.
        family_end (int): S.
        stranger_start (int): T.
        c (float): Restart probability. Default: 0.15
        tolerance (float): CPI tolerance. Default: 1e-9
        artifact (StrangerArtifact | None): Precomputed stranger scores for the same graph, c, tolerance and T;
            computed on the fly when omitted.
        ks (Sequence[int]): Cut-offs for recall@k; values above n are clipped. Default: (100, 500, 1000)
        threads (int): Parallelism of each sweep. Default: 1
        backend (numpy | torch): Sparse kernel. Default: numpy

    Returns:
        ErrorReport: Error, bound and ratio for the neighbor, stranger and total parts plus ranking quality, for
            TPA and for its variant without the stranger part.
    """
    params = TpaParams(family_end=family_end, stranger_start=stranger_start, restart_prob=c, tolerance=tolerance)
    if artifact is None:
        artifact = preprocess(graph, c, tolerance, stranger_start, threads=threads, backend=backend)
    else:
        artifact.check_graph(graph)
        used = (artifact.restart_prob, artifact.tolerance, artifact.stranger_start)
        requested = (c, tolerance, stranger_start)
        if used != requested:
            raise ValueError(f"Artifact was preprocessed with (c, tolerance, T)={used}, requested {requested}")

    family, neighbor, stranger = exact_parts(
        graph, seed, params.family_end, params.stranger_start, c, tolerance, threads=threads, backend=backend
    )
    scale = neighbor_scale_factor(c, family_end, stranger_start)
    approx_neighbor = scale * family

    exact = family + neighbor + stranger
    approx = family + approx_neighbor + artifact.stranger_scores

    # same vector query_na returns, without a second CPI pass
    no_stranger = family + approx_neighbor

    neighbor_bound, stranger_bound, total_bound = theoretical_bounds(c, family_end, stranger_start)
    ks = _clip_ks(ks, graph.node_count)

    return ErrorReport(
        seed=seed,
        family_end=family_end,
        stranger_start=stranger_start,
        restart_prob=c,
        neighbor=PartError.of(l1_error(neighbor, approx_neighbor), neighbor_bound),
        stranger=PartError.of(l1_error(stranger, artifact.stranger_scores), stranger_bound),
        total=PartError.of(l1_error(exact, approx), total_bound),
        recall_at_k={k: recall_at_k(exact, approx, k) for k in ks},
        spearman=_spearman_or_nan(seed, exact, approx),
        no_stranger_l1_error=l1_error(exact, no_stranger),
        no_stranger_recall_at_k={k: recall_at_k(exact, no_stranger, k) for k in ks},
        no_stranger_spearman=_spearman_or_nan(seed, exact, no_stranger),
    )


def summarize_reports(reports: Sequence[ErrorReport]) -> pd.DataFrame:
    """
    One-row frame with the mean and sample standard deviation of every per-seed column.

    The parameter columns ``S``, ``T`` and ``c`` are carried as-is together with ``num_seeds``.
    """
    if not reports:
        raise ValueError("Cannot summarize an empty list of reports")
    frame = pd.DataFrame([report.to_row() for report in reports])
    params = frame[["S", "T", "c"]].drop_duplicates()
    if len(params) != 1:
        raise ValueError("All reports must share the same S, T and c")

    stats = frame.drop(columns=["seed", "S", "T", "c"]).agg(["mean", "std"])
    flat = {f"{column}_{stat}": stats.at[stat, column] for column in stats.columns for stat in stats.index}
    summary = {**params.iloc[0].to_dict(), "num_seeds": len(reports), **flat}
    summary["S"], summary["T"] = int(summary["S"]), int(summary["T"])
    return pd.DataFrame([summary])


def format_error_table(reports: Sequence[ErrorReport]) -> str:
    """Plain-text table of mean bound, mean error and their ratio per part."""
    summary = summarize_reports(reports).iloc[0]
    table = pd.DataFrame(
        {
            "bound (A)": [summary[f"{part}_bound_mean"] for part in ("neighbor", "stranger", "total")],
            "error (B)": [summary[f"{part}_error_mean"] for part in ("neighbor", "stranger", "total")],
            "ratio (B/A)": [summary[f"{part}_ratio_mean"] for part in ("neighbor", "stranger", "total")],
        },
        index=["neighbor", "stranger", "total"],
    )
    lines = [
        f"S={summary['S']} T={summary['T']} c={summary['c']} seeds={summary['num_seeds']}",
        table.to_string(float_format=lambda v: f"{v:.4f}"),
    ]
    recall_columns = [column for column in summary.index if column.startswith("recall@") and column.endswith("_mean")]
    for column in recall_columns:
        lines.append(f"{column.removesuffix('_mean')}: {summary[column]:.4f}")
    lines.append(f"spearman: {summary['spearman_mean']:.4f}")
    lines.append(f"TPA-NA l1 error: {summary['no_stranger_error_mean']:.4f}")
    for column in recall_columns:
        lines.append(f"TPA-NA {column.removesuffix('_mean')}: {summary[f'no_stranger_{column}']:.4f}")
    lines.append(f"TPA-NA spearman: {summary['no_stranger_spearman_mean']:.4f}")
    return "\n".join(lines)
