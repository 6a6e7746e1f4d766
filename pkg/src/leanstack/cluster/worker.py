"""Worker daemon: serves chunk storage, pipeline execution and file
streaming over the framed protocol. Every artifact lives under a
job-scoped directory, so concurrent jobs cannot interfere."""

from __future__ import annotations

import logging
import re
import shutil
import socketserver
import tempfile
from pathlib import Path

from ..errors import LeanstackError, ProtocolError
from . import protocol as p
from .pipeline import PipelineSpec, resolve_job_path, run_pipeline

log = logging.getLogger("leanstack.worker")

_JOB_RE = re.compile(r"[A-Za-z0-9._-]{1,128}")


def _job_dir(root: Path, job: str) -> Path:
    if not _JOB_RE.fullmatch(job):
        raise ProtocolError(f"invalid job id {job!r}")
    d = root / "jobs" / job
    d.mkdir(parents=True, exist_ok=True)
    return d


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        root = self.server.data_root
        sock = self.request
        try:
            while True:
                frame = p.recv_frame(sock)
                if frame is None:
                    return
                ftype, payload = frame
                try:
                    self._dispatch(root, sock, ftype, payload)
                except LeanstackError as exc:
                    p.send_json(sock, p.ERR, {"error": str(exc)})
                    if isinstance(exc, ProtocolError):
                        return
        except (p.ProtocolError, ConnectionError, OSError) as exc:
            log.debug("connection dropped: %s", exc)

    def _dispatch(self, root: Path, sock, ftype: int, payload: bytes):
        if ftype == p.HELLO:
            p.send_json(sock, p.OK, {"root": str(root)})
        elif ftype == p.PUT_CHUNK:
            self._put_chunk(root, sock, p.decode_json(payload))
        elif ftype == p.STREAM_FILE:
            self._stream_file(root, sock, p.decode_json(payload))
        elif ftype == p.EXEC_PIPELINE:
            self._exec(root, sock, p.decode_json(payload))
        elif ftype == p.DELETE_JOB:
            req = p.decode_json(payload)
            job_dir = _job_dir(root, req["job"])
            shutil.rmtree(job_dir, ignore_errors=True)
            p.send_json(sock, p.OK, {})
        else:
            raise ProtocolError(f"unexpected frame {p.FRAME_NAMES[ftype]}")

    def _put_chunk(self, root: Path, sock, req: dict):
        job_dir = _job_dir(root, req["job"])
        path = resolve_job_path(job_dir, req["path"])
        path.parent.mkdir(parents=True, exist_ok=True)
        mode = "ab" if req.get("append") else "wb"
        nbytes = 0
        with open(path, mode) as f:
            while True:
                ftype, payload = p.expect(sock, p.DATA, p.END)
                if ftype == p.END:
                    break
                f.write(payload)
                nbytes += len(payload)
        p.send_json(sock, p.OK, {"bytes": nbytes})

    def _stream_file(self, root: Path, sock, req: dict):
        job_dir = _job_dir(root, req["job"])
        path = resolve_job_path(job_dir, req["path"])
        if not path.is_file():
            raise LeanstackError(f"no such file in job: {req['path']}")
        with open(path, "rb") as f:
            while True:
                chunk = f.read(p.DATA_CHUNK)
                if not chunk:
                    break
                p.send_frame(sock, p.DATA, chunk)
        p.send_frame(sock, p.END)

    def _exec(self, root: Path, sock, req: dict):
        job_dir = _job_dir(root, req["job"])
        spec = PipelineSpec.from_json(req["spec"])
        scratch = job_dir / "tmp"
        scratch.mkdir(exist_ok=True)
        report = run_pipeline(job_dir, spec, tmpdir=str(scratch))
        p.send_json(sock, p.OK, report)


class WorkerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], data_root: str):
        super().__init__(address, _Handler)
        self.data_root = Path(data_root)
        self.data_root.mkdir(parents=True, exist_ok=True)


def serve(host: str, port: int, data_root: str) -> None:
    """Run a worker daemon until interrupted."""
    with WorkerServer((host, port), data_root) as server:
        log.info("worker listening on %s:%d, root %s", host, port, data_root)
        server.serve_forever()
