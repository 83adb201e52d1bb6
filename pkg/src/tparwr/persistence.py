# Copyright (c) NXAI GmbH.

import logging
import os
import struct
import tempfile
import zlib
from os import PathLike
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict

from .errors import ArtifactFormatError
from .graph import Graph
from .tpa import StrangerArtifact

logger = logging.getLogger(__name__)

MAGIC = b"TPA1"
FORMAT_VERSION = 1

# magic, version u32, n u64, c f64, epsilon f64, T u32, fingerprint u64
HEADER = struct.Struct("<4sIQddIQ")
CHECKSUM = struct.Struct("<I")


def artifact_size(node_count: int) -> int:
    return HEADER.size + 8 * node_count + CHECKSUM.size


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def save_artifact(artifact: StrangerArtifact, path: str | PathLike) -> None:
    """
    Writes the stranger artifact in the little-endian ``TPA1`` layout.

    Header (magic, format version, n, c, epsilon, T, graph fingerprint), then n float64 scores, then a CRC32 of
    all preceding bytes. The file is written to a temporary sibling and renamed into place.
    """
    scores = np.ascontiguousarray(artifact.stranger_scores, dtype="<f8")
    header = HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        scores.shape[0],
        artifact.restart_prob,
        artifact.tolerance,
        artifact.stranger_start,
        artifact.graph_fingerprint,
    )
    body = header + scores.tobytes()
    payload = body + CHECKSUM.pack(zlib.crc32(body))
    _atomic_write(Path(path), payload)
    logger.info("Saved stranger artifact to %s (%d bytes)", path, len(payload))


def load_artifact(path: str | PathLike, graph: Graph | None = None) -> StrangerArtifact:
    """Reads an artifact written by :func:`save_artifact`.

    Args:
        path (str | PathLike): Artifact file.
        graph (Graph | None): When given, the artifact's fingerprint must match this graph.

    Returns:
        StrangerArtifact: The stored artifact, bitwise identical to the saved one.

    Raises:
        ArtifactFormatError: Bad magic, unsupported version, wrong length or checksum failure.
        StaleArtifactError: ``graph`` is given and does not match the stored fingerprint.
    """
    data = Path(path).read_bytes()
    if len(data) < HEADER.size + CHECKSUM.size:
        raise ArtifactFormatError(f"{path}: truncated artifact ({len(data)} bytes)")

    magic, version, n, c, tolerance, stranger_start, fingerprint = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ArtifactFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ArtifactFormatError(f"{path}: unsupported format version {version}, expected {FORMAT_VERSION}")
    if len(data) != artifact_size(n):
        raise ArtifactFormatError(f"{path}: expected {artifact_size(n)} bytes for n={n}, found {len(data)}")

    (stored_crc,) = CHECKSUM.unpack_from(data, len(data) - CHECKSUM.size)
    if zlib.crc32(data[: -CHECKSUM.size]) != stored_crc:
        raise ArtifactFormatError(f"{path}: checksum mismatch")

    scores = np.frombuffer(data, dtype="<f8", count=n, offset=HEADER.size).astype(np.float64)
    artifact = StrangerArtifact(
        stranger_scores=scores,
        graph_fingerprint=fingerprint,
        restart_prob=c,
        tolerance=tolerance,
        stranger_start=stranger_start,
    )
    if graph is not None:
        artifact.check_graph(graph)
    return artifact


class RunConfig(BaseModel):
    """Everything needed to rerun a command that produced an output file."""

    model_config = ConfigDict(frozen=True)

    command: str
    graph: str | None = None
    graph_fingerprint: int | None = None
    dangling_policy: str | None = None
    threads: int = 1
    backend: str = "numpy"
    params: dict[str, Any] = {}


def run_config_path(output: str | PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".json")


def save_run_config(path: str | PathLike, config: RunConfig) -> None:
    _atomic_write(Path(path), config.model_dump_json(indent=2).encode("utf-8"))


def load_run_config(path: str | PathLike) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_bytes())
