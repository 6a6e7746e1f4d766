"""Leader-side distributed operations: scatter, remote pipelines,
gather-merge, key-partitioned shuffle and plain gather.

The leader opens one long-lived connection per worker per job and
issues requests concurrently. Merges consume worker streams through
bounded per-stream buffers (one protocol frame plus socket buffers),
so leader memory does not grow with data volume.
"""

from __future__ import annotations

import itertools
import os
import shutil
import socket
import tempfile
import time
import uuid
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import ClusterError, LeanstackError, ProtocolError
from ..records import KeyRange
from .. import tukubai
from . import protocol as p
from .pipeline import PipelineSpec, resolve_job_path, run_pipeline
from .topology import ClusterTopology


def stable_hash(token: bytes) -> int:
    """Fixed published 32-bit hash (CRC-32); identical across runs and
    platforms so shuffles are reproducible."""
    return zlib.crc32(token)


class LocalNode:
    """The leader acting as a participant (clust-* style)."""

    def __init__(self, name: str, root: Path):
        self.name = name
        self.root = Path(root)

    def _job_dir(self, job: str) -> Path:
        d = self.root / "jobs" / job
        d.mkdir(parents=True, exist_ok=True)
        return d

    def put_file(self, job: str, path: str, chunks: Iterable[bytes], append=False) -> int:
        target = resolve_job_path(self._job_dir(job), path)
        target.parent.mkdir(parents=True, exist_ok=True)
        n = 0
        with open(target, "ab" if append else "wb") as f:
            for chunk in chunks:
                f.write(chunk)
                n += len(chunk)
        return n

    def exec_pipeline(self, job: str, spec: PipelineSpec) -> dict:
        job_dir = self._job_dir(job)
        scratch = job_dir / "tmp"
        scratch.mkdir(exist_ok=True)
        return run_pipeline(job_dir, spec, tmpdir=str(scratch))

    def stream_file(self, job: str, path: str) -> Iterator[bytes]:
        target = resolve_job_path(self._job_dir(job), path)
        if not target.is_file():
            raise ClusterError(f"no such file in job: {path}", node=self.name)
        with open(target, "rb") as f:
            while True:
                chunk = f.read(p.DATA_CHUNK)
                if not chunk:
                    return
                yield chunk

    def delete_job(self, job: str) -> None:
        shutil.rmtree(self.root / "jobs" / job, ignore_errors=True)

    def close(self) -> None:
        pass


class RemoteNode:
    """A worker daemon reached over the framed protocol."""

    def __init__(self, name: str, host: str, port: int):
        self.name = name
        self.host = host
        self.port = port
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self.host, self.port), timeout=30)
                p.send_json(self._sock, p.HELLO, {})
                self._expect_ok()
            except OSError as exc:
                self._sock = None
                raise ClusterError(
                    f"cannot reach worker {self.name} at {self.host}:{self.port}: {exc}",
                    node=self.name,
                ) from exc
        return self._sock

    def _expect_ok(self) -> dict:
        ftype, payload = p.expect(self._sock, p.OK, p.ERR)
        reply = p.decode_json(payload)
        if ftype == p.ERR:
            raise ClusterError(f"{self.name}: {reply.get('error')}", node=self.name)
        return reply

    def _request(self, ftype: int, obj: dict) -> dict:
        sock = self._connect()
        try:
            p.send_json(sock, ftype, obj)
            return self._expect_ok()
        except (ProtocolError, OSError) as exc:
            self.close()
            raise ClusterError(f"{self.name}: {exc}", node=self.name) from exc

    def put_file(self, job: str, path: str, chunks: Iterable[bytes], append=False) -> int:
        sock = self._connect()
        try:
            p.send_json(sock, p.PUT_CHUNK, {"job": job, "path": path, "append": append})
            for chunk in chunks:
                p.send_frame(sock, p.DATA, chunk)
            p.send_frame(sock, p.END)
            return self._expect_ok()["bytes"]
        except (ProtocolError, OSError) as exc:
            self.close()
            raise ClusterError(f"{self.name}: {exc}", node=self.name) from exc

    def exec_pipeline(self, job: str, spec: PipelineSpec) -> dict:
        return self._request(p.EXEC_PIPELINE, {"job": job, "spec": spec.to_json()})

    def stream_file(self, job: str, path: str) -> Iterator[bytes]:
        sock = self._connect()
        try:
            p.send_json(sock, p.STREAM_FILE, {"job": job, "path": path})
            while True:
                ftype, payload = p.expect(sock, p.DATA, p.END, p.ERR)
                if ftype == p.END:
                    return
                if ftype == p.ERR:
                    raise ClusterError(
                        f"{self.name}: {p.decode_json(payload).get('error')}",
                        node=self.name,
                    )
                yield payload
        except (ProtocolError, OSError) as exc:
            self.close()
            raise ClusterError(f"{self.name}: {exc}", node=self.name) from exc

    def delete_job(self, job: str) -> None:
        self._request(p.DELETE_JOB, {"job": job})

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


def _lines_from_chunks(chunks: Iterable[bytes]) -> Iterator[str]:
    # One decoded line block per network chunk; chain.from_iterable keeps
    # per-record iteration at C speed for downstream consumers.
    def blocks():
        tail = b""
        for chunk in chunks:
            buf = tail + chunk
            head, sep, tail = buf.rpartition(b"\n")
            if sep:
                yield head.decode("utf-8").split("\n")
        if tail:
            yield [tail.decode("utf-8")]

    return itertools.chain.from_iterable(blocks())


class Cluster:
    """One distributed job's view of the cluster.

    All per-job artifacts on every node live under the job id; close()
    tears them down best-effort.
    """

    def __init__(
        self,
        topology: ClusterTopology,
        job_id: str | None = None,
        leader_root: str | None = None,
    ):
        self.topology = topology
        self.job_id = job_id or uuid.uuid4().hex[:16]
        self._own_root = leader_root is None
        self.leader_root = Path(leader_root or tempfile.mkdtemp(prefix="leanstack-leader-"))
        self.leader_root.mkdir(parents=True, exist_ok=True)
        self.nodes: list = []
        if topology.leader_participates:
            self.nodes.append(LocalNode("leader", self.leader_root))
        self.nodes.extend(
            RemoteNode(f"worker{i}", host, port)
            for i, (host, port) in enumerate(topology.workers, 1)
        )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self, delete_jobs: bool = True) -> None:
        for node in self.nodes:
            if delete_jobs:
                try:
                    node.delete_job(self.job_id)
                except LeanstackError:
                    pass
            node.close()
        if self._own_root:
            shutil.rmtree(self.leader_root, ignore_errors=True)

    # -- scatter ---------------------------------------------------------

    def distr_distr(self, local_file: str | os.PathLike, dest: str) -> list[dict]:
        """Split a file at record boundaries into byte-balanced chunks,
        one per participating node; chunk order follows node order."""
        size = os.path.getsize(local_file)
        k = len(self.nodes)
        manifest = []
        try:
            with open(local_file, "rb") as f:
                start = 0
                for i, node in enumerate(self.nodes):
                    end = size if i == k - 1 else self._snap(f, round((i + 1) * size / k))
                    nbytes = node.put_file(
                        self.job_id, dest, self._read_span(f, start, end - start)
                    )
                    manifest.append({"node": node.name, "bytes": nbytes})
                    start = end
        except LeanstackError:
            self._cleanup_partial(dest)
            raise
        return manifest

    @staticmethod
    def _snap(f, offset: int) -> int:
        """Advance a byte offset forward to just past the next newline."""
        f.seek(offset)
        if offset == 0:
            return 0
        f.seek(offset - 1)
        if f.read(1) == b"\n":
            return offset
        while True:
            block = f.read(1 << 16)
            if not block:
                return f.tell()
            nl = block.find(b"\n")
            if nl >= 0:
                return f.tell() - len(block) + nl + 1

    @staticmethod
    def _read_span(f, start: int, length: int) -> Iterator[bytes]:
        f.seek(start)
        remaining = length
        while remaining > 0:
            chunk = f.read(min(remaining, p.DATA_CHUNK))
            if not chunk:
                raise ClusterError("input file truncated while scattering")
            remaining -= len(chunk)
            yield chunk

    def _cleanup_partial(self, dest: str) -> None:
        for node in self.nodes:
            try:
                node.delete_job(self.job_id)
            except LeanstackError:
                pass

    # -- remote execution --------------------------------------------------

    def remote_exec(self, spec: PipelineSpec) -> list[dict]:
        """Run a pipeline on every participating node concurrently."""
        with ThreadPoolExecutor(max_workers=len(self.nodes)) as pool:
            futures = [
                (node, pool.submit(node.exec_pipeline, self.job_id, spec))
                for node in self.nodes
            ]
            reports = []
            failure = None
            for node, fut in futures:
                try:
                    report = fut.result()
                    reports.append({"node": node.name, **report})
                except LeanstackError as exc:
                    if failure is None:
                        failure = ClusterError(
                            f"pipeline failed on {node.name}: {exc}", node=node.name
                        )
            if failure is not None:
                raise failure
        return reports

    # -- gather-merge ------------------------------------------------------

    def distr_dmerge(self, key: KeyRange, remote: str) -> Iterator[str]:
        """Stream every node's sorted file and k-way merge at the leader.

        Ties break by node order (leader first when participating).
        """
        streams = [
            _lines_from_chunks(node.stream_file(self.job_id, remote))
            for node in self.nodes
        ]
        names = [node.name for node in self.nodes]
        return tukubai.dmerge(streams, key, names=names)

    # -- shuffle -----------------------------------------------------------

    def shuffle_by_key(self, remote: str, key: KeyRange, dest: str | None = None) -> None:
        """Repartition every node's file so records sharing a key land on
        exactly one node: destination = stable_hash(key columns) mod k.

        Records are spooled at the leader first, so shuffling a path onto
        itself is safe. Within each destination, records keep (source
        node, original position) order.
        """
        dest = dest or remote
        k = len(self.nodes)
        start, stop = key.start, key.stop
        spool_dir = Path(tempfile.mkdtemp(prefix="shuffle-", dir=self.leader_root))
        try:
            spools = [
                open(spool_dir / f"part{i}", "wb", buffering=1 << 20) for i in range(k)
            ]
            try:
                single = start == stop
                for node in self.nodes:
                    for line in _lines_from_chunks(node.stream_file(self.job_id, remote)):
                        fields = line.split(" ", stop)
                        if len(fields) < stop:
                            raise ClusterError(
                                f"record on {node.name} too narrow for shuffle key: {line!r}",
                                node=node.name,
                            )
                        token = (
                            fields[start - 1]
                            if single
                            else "\x00".join(fields[start - 1 : stop])
                        ).encode("utf-8")
                        spools[stable_hash(token) % k].write(line.encode("utf-8") + b"\n")
            finally:
                for f in spools:
                    f.close()
            for i, node in enumerate(self.nodes):
                node.put_file(
                    self.job_id, dest, self._file_chunks(spool_dir / f"part{i}")
                )
        finally:
            shutil.rmtree(spool_dir, ignore_errors=True)

    @staticmethod
    def _file_chunks(path: Path) -> Iterator[bytes]:
        with open(path, "rb") as f:
            while True:
                chunk = f.read(p.DATA_CHUNK)
                if not chunk:
                    return
                yield chunk

    # -- gather ------------------------------------------------------------

    def gather(self, remote: str, local: str | os.PathLike) -> int:
        """Concatenate every node's file to the leader, in node order."""
        nbytes = 0
        try:
            with open(local, "wb") as out:
                for node in self.nodes:
                    for chunk in node.stream_file(self.job_id, remote):
                        out.write(chunk)
                        nbytes += len(chunk)
        except OSError as exc:
            raise ClusterError(f"cannot write gathered output {local}: {exc}") from exc
        return nbytes
