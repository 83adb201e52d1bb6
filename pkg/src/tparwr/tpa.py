# Copyright (c) NXAI GmbH.

import logging
import warnings
from dataclasses import dataclass
from os import PathLike

from .cpi import CpiParams, SeedSet, cpi_run, cpi_segments, pagerank
from .errors import StaleArtifactError
from .graph import Backend, Graph, ScoreVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TpaParams:
    # S: first iteration of the neighbor part, T: first iteration of the stranger part
    family_end: int = 5
    stranger_start: int = 10

    restart_prob: float = 0.15
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.family_end < 1:
            raise ValueError(f"family_end (S) must be >= 1, got {self.family_end}")

        if self.stranger_start <= self.family_end:
            raise ValueError(
                f"stranger_start (T) must be greater than family_end (S), "
                f"got S={self.family_end} T={self.stranger_start}"
            )

        if not 0.0 < self.restart_prob < 1.0:
            raise ValueError(f"restart_prob must be in (0, 1), got {self.restart_prob}")

        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

    @classmethod
    def default(cls) -> "TpaParams":
        return cls(family_end=5, stranger_start=10, restart_prob=0.15, tolerance=1e-9)


@dataclass(frozen=True, eq=False)
class StrangerArtifact:
    """Seed-independent stranger scores: the PageRank tail over iterations ``[T, inf)``."""

    stranger_scores: ScoreVector
    graph_fingerprint: int
    restart_prob: float
    tolerance: float
    stranger_start: int

    @property
    def node_count(self) -> int:
        return int(self.stranger_scores.shape[0])

    def check_graph(self, graph: Graph) -> None:
        if self.graph_fingerprint != graph.fingerprint:
            raise StaleArtifactError(self.graph_fingerprint, graph.fingerprint)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StrangerArtifact):
            return NotImplemented
        return (
            self.graph_fingerprint == other.graph_fingerprint
            and self.restart_prob == other.restart_prob
            and self.tolerance == other.tolerance
            and self.stranger_start == other.stranger_start
            and self.stranger_scores.tobytes() == other.stranger_scores.tobytes()
        )


def _warn_if_leaky(graph: Graph) -> None:
    if not graph.is_stochastic:
        warnings.warn(
            "Graph uses the 'drop' dangling policy and has dangling nodes; score mass leaks and the "
            "approximation bounds no longer apply.",
            UserWarning,
            stacklevel=3,
        )


def preprocess(
    graph: Graph,
    c: float = 0.15,
    tolerance: float = 1e-9,
    stranger_start: int = 10,
    threads: int = 1,
    backend: Backend = "numpy",
) -> StrangerArtifact:
    """Computes the stranger approximation, PageRank accumulated over ``[T, inf)``.

    Args:
        graph (Graph): Graph the artifact is bound to (by fingerprint).
        c (float): Restart probability. Default: 0.15
        tolerance (float): CPI convergence tolerance. Default: 1e-9
        stranger_start (int): T, first iteration of the stranger part. Default: 10
        threads (int): Parallelism of each sweep. Default: 1
        backend (numpy | torch): Sparse kernel. Default: numpy

    Returns:
        StrangerArtifact: The stranger scores with graph fingerprint and the parameters used.
    """
    if stranger_start < 1:
        raise ValueError(f"stranger_start (T) must be >= 1, got {stranger_start}")
    _warn_if_leaky(graph)

    result = pagerank(graph, c, tolerance, start_iter=stranger_start, threads=threads, backend=backend)
    logger.info(
        "Preprocessed stranger scores: T=%d iterations=%d mass=%.6f",
        stranger_start,
        result.iterations_run,
        float(result.scores.sum()),
    )
    return StrangerArtifact(
        stranger_scores=result.scores,
        graph_fingerprint=graph.fingerprint,
        restart_prob=c,
        tolerance=tolerance,
        stranger_start=stranger_start,
    )


def neighbor_scale_factor(c: float, family_end: int, stranger_start: float) -> float:
    """
    Ratio of the neighbor part's L1 mass to the family part's, ``((1-c)^S - (1-c)^T) / (1 - (1-c)^S)``.

    ``stranger_start`` may be ``math.inf`` for the limit without a stranger part.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"Restart probability must be in (0, 1), got {c}")
    if family_end < 1 or stranger_start < family_end:
        raise ValueError(f"Need 1 <= S <= T, got S={family_end} T={stranger_start}")
    decay = 1.0 - c
    return (decay**family_end - decay**stranger_start) / (1.0 - decay**family_end)


def _family(graph: Graph, seed: int, family_end: int, c: float, tolerance: float, threads: int, backend: Backend):
    params = CpiParams(restart_prob=c, tolerance=tolerance, start_iter=0, terminal_iter=family_end - 1)
    return cpi_run(graph, SeedSet.single(seed, graph.node_count), params, threads=threads, backend=backend).scores


def query(
    graph: Graph,
    artifact: StrangerArtifact,
    seed: int,
    family_end: int,
    threads: int = 1,
    backend: Backend = "numpy",
) -> ScoreVector:
    """Online phase: exact family part, scaled family part as the neighbor part, precomputed stranger part.

    Args:
        graph (Graph): Graph the artifact was preprocessed on.
        artifact (StrangerArtifact): Output of :func:`preprocess`; supplies c, tolerance and T.
        seed (int): Internal id of the seed node.
        family_end (int): S, number of exactly computed iterations; must be below T.
        threads (int): Parallelism of each sweep. Default: 1
        backend (numpy | torch): Sparse kernel. Default: numpy

    Returns:
        ScoreVector: Approximate RWR scores.

    Raises:
        StaleArtifactError: The artifact belongs to a different graph.
        ValueError: ``S >= T`` or an invalid seed.
    """
    artifact.check_graph(graph)
    params = TpaParams(
        family_end=family_end,
        stranger_start=artifact.stranger_start,
        restart_prob=artifact.restart_prob,
        tolerance=artifact.tolerance,
    )
    family = _family(graph, seed, params.family_end, params.restart_prob, params.tolerance, threads, backend)
    scale = neighbor_scale_factor(params.restart_prob, params.family_end, params.stranger_start)
    return family + scale * family + artifact.stranger_scores


def query_na(
    graph: Graph,
    seed: int,
    family_end: int,
    stranger_start: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    threads: int = 1,
    backend: Backend = "numpy",
) -> ScoreVector:
    """Ablation without the stranger approximation: family part plus scaled family part only."""
    params = TpaParams(family_end=family_end, stranger_start=stranger_start, restart_prob=c, tolerance=tolerance)
    family = _family(graph, seed, params.family_end, c, tolerance, threads, backend)
    return family + neighbor_scale_factor(c, family_end, stranger_start) * family


def exact_parts(
    graph: Graph,
    seed: int,
    family_end: int,
    stranger_start: int,
    c: float = 0.15,
    tolerance: float = 1e-9,
    threads: int = 1,
    backend: Backend = "numpy",
) -> tuple[ScoreVector, ScoreVector, ScoreVector]:
    """Exact family, neighbor and stranger parts of the RWR scores for ``seed``."""
    params = TpaParams(family_end=family_end, stranger_start=stranger_start, restart_prob=c, tolerance=tolerance)
    family, neighbor, stranger = cpi_segments(
        graph,
        SeedSet.single(seed, graph.node_count),
        CpiParams(restart_prob=c, tolerance=tolerance),
        splits=(params.family_end, params.stranger_start),
        threads=threads,
        backend=backend,
    )
    return family, neighbor, stranger


class TpaModel:
    """
    Two-phase approximate RWR over one graph.

    Example:
        >>> from tparwr import TpaModel, TpaParams, load_edge_list
        >>>
        >>> graph, id_map = load_edge_list("soc-Slashdot0902.txt")
        >>> model = TpaModel(graph, TpaParams(family_end=5, stranger_start=15)).fit()
        >>> scores = model.query(id_map.to_internal(42))
        >>> model.save_model("slashdot.tpa")
    """

    def __init__(
        self, graph: Graph, params: TpaParams | None = None, threads: int = 1, backend: Backend = "numpy"
    ) -> None:
        self.graph = graph
        self.params = params if params is not None else TpaParams()
        self.threads = threads
        self.backend = backend
        self.artifact: StrangerArtifact | None = None

    def fit(self) -> "TpaModel":
        self.artifact = preprocess(
            self.graph,
            c=self.params.restart_prob,
            tolerance=self.params.tolerance,
            stranger_start=self.params.stranger_start,
            threads=self.threads,
            backend=self.backend,
        )
        return self

    def _require_artifact(self) -> StrangerArtifact:
        if self.artifact is None:
            raise RuntimeError("TpaModel has no stranger artifact; call fit() or load_model() first")
        return self.artifact

    def query(self, seed: int, family_end: int | None = None) -> ScoreVector:
        family_end = self.params.family_end if family_end is None else family_end
        return query(self.graph, self._require_artifact(), seed, family_end, self.threads, self.backend)

    def query_na(self, seed: int, family_end: int | None = None) -> ScoreVector:
        family_end = self.params.family_end if family_end is None else family_end
        return query_na(
            self.graph,
            seed,
            family_end,
            self.params.stranger_start,
            self.params.restart_prob,
            self.params.tolerance,
            self.threads,
            self.backend,
        )

    def save_model(self, path: str | PathLike) -> None:
        from .persistence import save_artifact

        save_artifact(self._require_artifact(), path)

    @classmethod
    def load_model(
        cls,
        path: str | PathLike,
        graph: Graph,
        family_end: int = 5,
        threads: int = 1,
        backend: Backend = "numpy",
    ) -> "TpaModel":
        """Restores a model from a saved artifact; the artifact must match ``graph``."""
        from .persistence import load_artifact

        artifact = load_artifact(path, graph=graph)
        params = TpaParams(
            family_end=family_end,
            stranger_start=artifact.stranger_start,
            restart_prob=artifact.restart_prob,
            tolerance=artifact.tolerance,
        )
        model = cls(graph, params, threads=threads, backend=backend)
        model.artifact = artifact
        return model
