# Copyright (c) NXAI GmbH.


class GraphFormatError(ValueError):
    """Raised when an edge list line cannot be parsed."""

    def __init__(self, path: str, line_number: int, line: str, reason: str) -> None:
        self.path = path
        self.line_number = line_number
        self.line = line
        super().__init__(f"{path}:{line_number}: {reason}: {line!r}")


class EmptyGraphError(ValueError):
    pass


class InfeasibleGraphError(ValueError):
    pass


class ArtifactFormatError(ValueError):
    pass


class StaleArtifactError(ValueError):
    """Raised when a stranger artifact was preprocessed on a different graph."""

    def __init__(self, artifact_fingerprint: int, graph_fingerprint: int) -> None:
        self.artifact_fingerprint = artifact_fingerprint
        self.graph_fingerprint = graph_fingerprint
        super().__init__(
            f"Artifact fingerprint {artifact_fingerprint:#018x} does not match graph fingerprint "
            f"{graph_fingerprint:#018x}. Re-run preprocessing for this graph."
        )


class UndefinedCorrelationError(ValueError):
    pass
