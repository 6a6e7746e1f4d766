"""The six micro-benchmark workloads and their execution plans.

Each workload has a single-node oracle plan, which defines correct
output, and a distributed plan over a cluster. Both produce an output
file whose digest goes into the report.
"""

from __future__ import annotations

import os
import shutil
import statistics
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .. import tukubai
from ..cluster import Cluster, ClusterTopology, PipelineSpec
from ..errors import BenchError
from ..records import parse_key_spec
from .verify import DIGEST_ALGORITHM, output_digest

WORKLOAD_NAMES = ("grep", "sort", "wordcount", "select", "join", "aggregation")

# select and join are order-insensitive: their distributed output order
# depends on placement, so digests are taken over canonicalized lines.
ORDER_INSENSITIVE = frozenset({"select", "join"})


@dataclass(frozen=True)
class Workload:
    name: str
    needle: str = "ab"
    select_column: int = 3
    threshold: str = "50"
    join_key_left: str = "key=1"
    join_key_right: str = "key=2"
    group_key: str = "key=2/2"
    sum_columns: str = "key=3/3"

    def __post_init__(self):
        if self.name not in WORKLOAD_NAMES:
            raise BenchError(f"unknown workload {self.name!r}")
        if self.name == "grep" and not self.needle:
            raise BenchError("grep workload needs a non-empty needle")

    @property
    def order_sensitive(self) -> bool:
        return self.name not in ORDER_INSENSITIVE

    @property
    def roles(self) -> tuple[str, ...]:
        """Which dataset files feed this workload."""
        if self.name in ("grep", "sort", "wordcount"):
            return ("text",)
        if self.name in ("select", "aggregation"):
            return ("item",)
        return ("item", "order")


@dataclass
class WorkloadReport:
    workload: str
    engine: str
    input_bytes: int
    wall_time: float
    rate: float
    output_digest: str
    repetitions: list[float]
    digest_algorithm: str = DIGEST_ALGORITHM
    output_path: str | None = None


def compute_rate(input_bytes: int, wall_time: float) -> float:
    """Loading/processing rate in bytes per second."""
    if wall_time <= 0:
        raise BenchError(f"wall time must be positive, got {wall_time}")
    return input_bytes / wall_time


def _role_of(path: str) -> str:
    name = os.path.basename(path)
    for role in ("text", "item", "order"):
        if name.startswith(role):
            return role
    raise BenchError(f"cannot classify dataset file {path!r} as text/item/order")


def _files_for(manifest: list[dict], role: str) -> list[str]:
    files = [e["path"] for e in manifest if _role_of(e["path"]) == role]
    if not files:
        raise BenchError(f"manifest holds no {role} files")
    return files


def _concat(files: list[str], dest: Path) -> None:
    with open(dest, "wb") as out:
        for path in files:
            with open(path, "rb") as f:
                shutil.copyfileobj(f, out, 1 << 20)


def _read_chunks(paths: list[str], size=1 << 20):
    for path in paths:
        with open(path, "r", encoding="utf-8", newline="\n") as f:
            while True:
                chunk = f.read(size)
                if not chunk:
                    break
                yield chunk


def _read_all_lines(paths: list[str]):
    for path in paths:
        yield from tukubai.read_lines(path)


# -- oracle plans -----------------------------------------------------------


def _oracle_run(w: Workload, manifest: list[dict], out: Path, mem_budget, tmpdir):
    if w.name == "grep":
        files = _files_for(manifest, "text")
        count = sum(
            tukubai.grep_count(tukubai.read_lines(p), w.needle) for p in files
        )
        tukubai.write_lines(out, [str(count)])
    elif w.name == "sort":
        stream = tukubai.tokenize(_read_chunks(_files_for(manifest, "text")))
        stream = tukubai.msort(stream, parse_key_spec("key=1"), mem_budget, tmpdir)
        tukubai.write_lines(out, stream)
    elif w.name == "wordcount":
        key = parse_key_spec("key=1")
        stream = tukubai.tokenize(_read_chunks(_files_for(manifest, "text")))
        stream = tukubai.msort(stream, key, mem_budget, tmpdir)
        stream = tukubai.count_by_key(stream, key)
        stream = tukubai.sm2(stream, key, parse_key_spec("key=2/2"))
        tukubai.write_lines(out, stream)
    elif w.name == "select":
        stream = tukubai.select_rows(
            _read_all_lines(_files_for(manifest, "item")), w.select_column, w.threshold
        )
        tukubai.write_lines(out, stream)
    elif w.name == "join":
        kl = parse_key_spec(w.join_key_left)
        kr = parse_key_spec(w.join_key_right)
        left = tukubai.msort(
            _read_all_lines(_files_for(manifest, "item")), kl, mem_budget, tmpdir
        )
        right = tukubai.msort(
            _read_all_lines(_files_for(manifest, "order")), kr, mem_budget, tmpdir
        )
        tukubai.write_lines(out, tukubai.merge_join(left, right, kl, kr))
    elif w.name == "aggregation":
        gkey = parse_key_spec(w.group_key)
        stream = tukubai.msort(
            _read_all_lines(_files_for(manifest, "item")), gkey, mem_budget, tmpdir
        )
        tukubai.write_lines(out, tukubai.sm2(stream, gkey, parse_key_spec(w.sum_columns)))


# -- distributed plans --------------------------------------------------------


def stage_dataset(
    cluster: Cluster, manifest: list[dict], roles, workdir: str | os.PathLike
) -> None:
    """Scatter the dataset files for the given roles onto the cluster.

    Staging once and running several workloads against the same cluster
    (run_workload's ``cluster`` argument) avoids re-loading shared
    inputs.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    for role in roles:
        staged = workdir / f"{role}.all"
        _concat(_files_for(manifest, role), staged)
        cluster.distr_distr(staged, "dataset.txt" if role == "text" else f"{role}.txt")
        staged.unlink()


def _distributed_run(cluster: Cluster, w: Workload, out: Path, mem_budget):
    if w.name == "grep":
        cluster.remote_exec(
            PipelineSpec(
                (("grep", {"needle": w.needle}),), "dataset.txt", "grep.out"
            )
        )
        gathered = out.with_suffix(".counts")
        cluster.gather("grep.out", gathered)
        total = sum(int(l) for l in tukubai.read_lines(gathered))
        gathered.unlink()
        tukubai.write_lines(out, [str(total)])
    elif w.name == "sort":
        cluster.remote_exec(
            PipelineSpec(
                (
                    ("tokenize", {}),
                    ("msort", {"key": "key=1", "mem_budget": mem_budget}),
                ),
                "dataset.txt",
                "sorted.out",
            )
        )
        tukubai.write_lines(out, cluster.distr_dmerge(parse_key_spec("key=1"), "sorted.out"))
    elif w.name == "wordcount":
        cluster.remote_exec(
            PipelineSpec(
                (
                    ("tokenize", {}),
                    ("msort", {"key": "key=1", "mem_budget": mem_budget}),
                    ("count", {"key": "key=1"}),
                    ("sm2", {"key": "key=1", "sum": "key=2/2"}),
                ),
                "dataset.txt",
                "wc.out",
            )
        )
        merged = cluster.distr_dmerge(parse_key_spec("key=1"), "wc.out")
        final = tukubai.sm2(merged, parse_key_spec("key=1"), parse_key_spec("key=2/2"))
        tukubai.write_lines(out, final)
    elif w.name == "select":
        cluster.remote_exec(
            PipelineSpec(
                (("select", {"column": w.select_column, "threshold": w.threshold}),),
                "item.txt",
                "select.out",
            )
        )
        cluster.gather("select.out", out)
    elif w.name == "join":
        kl, kr = w.join_key_left, w.join_key_right
        cluster.shuffle_by_key("item.txt", parse_key_spec(kl), dest="item.shuf")
        cluster.shuffle_by_key("order.txt", parse_key_spec(kr), dest="order.shuf")
        cluster.remote_exec(
            PipelineSpec(
                (("msort", {"key": kl, "mem_budget": mem_budget}),),
                "item.shuf",
                "item.sorted",
            )
        )
        cluster.remote_exec(
            PipelineSpec(
                (("msort", {"key": kr, "mem_budget": mem_budget}),),
                "order.shuf",
                "order.sorted",
            )
        )
        cluster.remote_exec(
            PipelineSpec(
                (
                    (
                        "join",
                        {"right": "order.sorted", "key_left": kl, "key_right": kr},
                    ),
                ),
                "item.sorted",
                "join.out",
            )
        )
        cluster.gather("join.out", out)
    elif w.name == "aggregation":
        cluster.remote_exec(
            PipelineSpec(
                (
                    ("msort", {"key": w.group_key, "mem_budget": mem_budget}),
                    ("sm2", {"key": w.group_key, "sum": w.sum_columns}),
                ),
                "item.txt",
                "agg.out",
            )
        )
        merged = cluster.distr_dmerge(parse_key_spec("key=1"), "agg.out")
        final = tukubai.sm2(merged, parse_key_spec("key=1"), parse_key_spec("key=2/2"))
        tukubai.write_lines(out, final)


def run_workload(
    workload: Workload,
    manifest: list[dict],
    engine: str,
    workdir: str | os.PathLike,
    topology: ClusterTopology | None = None,
    reps: int = 1,
    mem_budget: int | None = None,
    job_id: str | None = None,
    cluster: Cluster | None = None,
) -> WorkloadReport:
    """Execute one workload and return its report.

    Wall time covers data processing only; distributed loading
    (scatter) happens once before the timed repetitions, mirroring a
    separate load phase. Passing an open ``cluster`` skips both scatter
    and teardown: the caller owns the cluster and must have staged the
    dataset already (see stage_dataset).
    """
    if engine not in ("oracle", "distributed"):
        raise BenchError(f"unknown engine {engine!r}")
    if reps < 1:
        raise BenchError("need at least one repetition")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    out = workdir / f"{workload.name}.{engine}.out"
    input_bytes = sum(
        e["bytes"] for e in manifest if _role_of(e["path"]) in workload.roles
    )
    times: list[float] = []
    if engine == "oracle":
        tmpdir = workdir / "tmp"
        tmpdir.mkdir(exist_ok=True)
        for _ in range(reps):
            started = time.monotonic()
            _oracle_run(workload, manifest, out, mem_budget, str(tmpdir))
            times.append(time.monotonic() - started)
    elif cluster is not None:
        for _ in range(reps):
            started = time.monotonic()
            _distributed_run(cluster, workload, out, mem_budget)
            times.append(time.monotonic() - started)
    else:
        if topology is None:
            raise BenchError("distributed engine needs a cluster topology")
        with Cluster(topology, job_id=job_id or uuid.uuid4().hex[:12]) as owned:
            stage_dataset(owned, manifest, workload.roles, workdir)
            for _ in range(reps):
                started = time.monotonic()
                _distributed_run(owned, workload, out, mem_budget)
                times.append(time.monotonic() - started)
    wall = statistics.fmean(times)
    return WorkloadReport(
        workload=workload.name,
        engine=engine,
        input_bytes=input_bytes,
        wall_time=wall,
        rate=compute_rate(input_bytes, wall),
        output_digest=output_digest(out, workload.order_sensitive),
        repetitions=times,
        output_path=str(out),
    )
