"""Remote pipeline specs and their interpreter.

A pipeline is a list of named stages drawn from the tukubai operation
set, applied to one input file and written to one output file, both
relative to an isolated job directory. Specs, not arbitrary programs,
are what travels over the wire.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import tukubai
from ..errors import PipelineError
from ..records import parse_key_spec

STAGE_NAMES = ("tokenize", "msort", "count", "sm2", "lcnt", "grep", "select", "join")


@dataclass(frozen=True)
class PipelineSpec:
    """Ordered command invocations to execute on one node's local data."""

    stages: tuple[tuple[str, dict], ...]
    input: str
    output: str

    def __post_init__(self):
        if not self.stages:
            raise PipelineError("pipeline must have at least one stage")
        for name, _ in self.stages:
            if name not in STAGE_NAMES:
                raise PipelineError(f"unknown pipeline stage {name!r}")

    def to_json(self) -> dict:
        return {
            "stages": [[n, dict(a)] for n, a in self.stages],
            "input": self.input,
            "output": self.output,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineSpec":
        try:
            stages = tuple((n, dict(a)) for n, a in obj["stages"])
            return cls(stages, obj["input"], obj["output"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PipelineError(f"bad pipeline spec: {exc}") from exc


def resolve_job_path(job_dir: Path, rel: str) -> Path:
    """Resolve a job-relative path, refusing escapes from the job dir."""
    p = (job_dir / rel).resolve()
    if not p.is_relative_to(job_dir.resolve()):
        raise PipelineError(f"path escapes job directory: {rel!r}")
    return p


def _read_text_chunks(path: Path, size=1 << 20):
    with open(path, "r", encoding="utf-8", newline="\n") as f:
        while True:
            chunk = f.read(size)
            if not chunk:
                return
            yield chunk


def run_pipeline(job_dir: Path, spec: PipelineSpec, tmpdir=None) -> dict:
    """Execute a pipeline over the job directory's local data.

    Returns {"seconds": wall time, "records": output record count}.
    """
    in_path = resolve_job_path(job_dir, spec.input)
    out_path = resolve_job_path(job_dir, spec.output)
    if not in_path.exists():
        raise PipelineError(f"pipeline input missing: {spec.input}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    # tokenize consumes raw text chunks (it handles words split across
    # chunk boundaries); everything else consumes record lines.
    if spec.stages[0][0] == "tokenize":
        stream = _read_text_chunks(in_path)
    else:
        stream = tukubai.read_lines(in_path)
    for name, args in spec.stages:
        stream = _apply_stage(job_dir, name, args, stream, tmpdir)
    records, _ = tukubai.write_lines(out_path, stream)
    return {"seconds": time.monotonic() - started, "records": records}


def _apply_stage(job_dir: Path, name: str, args: dict, stream, tmpdir):
    try:
        if name == "tokenize":
            return tukubai.tokenize(stream)
        if name == "msort":
            return tukubai.msort(
                stream,
                parse_key_spec(args["key"]),
                mem_budget=args.get("mem_budget"),
                tmpdir=tmpdir,
            )
        if name == "count":
            return tukubai.count_by_key(stream, parse_key_spec(args["key"]))
        if name == "sm2":
            return tukubai.sm2(
                stream, parse_key_spec(args["key"]), parse_key_spec(args["sum"])
            )
        if name == "lcnt":
            return iter([str(tukubai.lcnt(stream))])
        if name == "grep":
            return iter([str(tukubai.grep_count(stream, args["needle"]))])
        if name == "select":
            return tukubai.select_rows(stream, int(args["column"]), args["threshold"])
        if name == "join":
            right = tukubai.read_lines(resolve_job_path(job_dir, args["right"]))
            return tukubai.merge_join(
                stream,
                right,
                parse_key_spec(args["key_left"]),
                parse_key_spec(args["key_right"]),
            )
    except KeyError as exc:
        raise PipelineError(f"stage {name!r} missing argument {exc}") from exc
    raise PipelineError(f"unknown pipeline stage {name!r}")
