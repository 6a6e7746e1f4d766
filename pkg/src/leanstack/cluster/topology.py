"""Cluster topology and its line-oriented config format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from ..errors import ClusterError


@dataclass(frozen=True)
class ClusterTopology:
    """Leader's view of worker endpoints and leader participation.

    Worker order is stable and defines chunk and merge-tie ordering.
    With leader_participates the leader also executes pipelines
    (clust-* style); without, it only coordinates (distr-* style).
    """

    workers: tuple[tuple[str, int], ...]
    leader_participates: bool = False

    def __post_init__(self):
        if not self.workers:
            raise ClusterError("cluster needs at least one worker")


def load_cluster_config(path: str | os.PathLike) -> ClusterTopology:
    """Parse a config of `worker = HOST:PORT` lines plus an optional
    `leader_participates = true|false` line."""
    workers: list[tuple[str, int]] = []
    participates = False
    with open(path, "r", encoding="utf-8") as f:
        for no, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ClusterError(f"{path}:{no}: expected `name = value`")
            name, _, value = line.partition("=")
            name, value = name.strip(), value.strip()
            if name == "worker":
                host, _, port = value.rpartition(":")
                if not host or not port.isdigit():
                    raise ClusterError(f"{path}:{no}: bad endpoint {value!r}")
                workers.append((host, int(port)))
            elif name == "leader_participates":
                if value not in ("true", "false"):
                    raise ClusterError(f"{path}:{no}: expected true|false")
                participates = value == "true"
            else:
                raise ClusterError(f"{path}:{no}: unknown setting {name!r}")
    return ClusterTopology(tuple(workers), participates)
