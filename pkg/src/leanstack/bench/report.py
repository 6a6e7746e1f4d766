"""Benchmark report files.

A report is itself a record file the toolkit can post-process: a
header line, then one row per repetition with columns
(workload, engine, bytes, seconds, rate, digest).
"""

from __future__ import annotations

import os

from ..errors import BenchError
from .workloads import WorkloadReport, compute_rate

HEADER = "workload engine bytes seconds rate digest"


def write_report(path: str | os.PathLike, reports: list[WorkloadReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(HEADER + "\n")
        for r in reports:
            for seconds in r.repetitions:
                rate = compute_rate(r.input_bytes, seconds)
                f.write(
                    f"{r.workload} {r.engine} {r.input_bytes} "
                    f"{seconds!r} {rate!r} {r.output_digest}\n"
                )


def read_report(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != HEADER:
            raise BenchError(f"{path}: not a report file (header {header!r})")
        for no, line in enumerate(f, 2):
            parts = line.split()
            if len(parts) != 6:
                raise BenchError(f"{path}:{no}: expected 6 columns")
            rows.append(
                {
                    "workload": parts[0],
                    "engine": parts[1],
                    "bytes": int(parts[2]),
                    "seconds": float(parts[3]),
                    "rate": float(parts[4]),
                    "digest": parts[5],
                }
            )
    if not rows:
        raise BenchError(f"{path}: report holds no rows")
    return rows
