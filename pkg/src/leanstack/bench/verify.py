"""Output verification by content digest.

The digest algorithm is pinned here and recorded in every report.
Deterministic workloads compare raw bytes; order-insensitive ones
(select, join) compare digests of the canonically sorted lines, since
distributed execution order is unspecified.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from ..errors import BenchError

DIGEST_ALGORITHM = "md5"

_READ_BLOCK = 1 << 20


def digest_file(path: str | os.PathLike) -> str:
    h = hashlib.new(DIGEST_ALGORITHM)
    with open(path, "rb") as f:
        while True:
            block = f.read(_READ_BLOCK)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def canonical_digest(path: str | os.PathLike) -> str:
    """Digest of the byte-wise sorted lines; idempotent under reordering."""
    with open(path, "rb") as f:
        lines = f.read().splitlines(keepends=False)
    lines.sort()
    h = hashlib.new(DIGEST_ALGORITHM)
    step = 1 << 16
    for base in range(0, len(lines), step):
        h.update(b"\n".join(lines[base : base + step]) + b"\n")
    return h.hexdigest()


def output_digest(path: str | os.PathLike, order_sensitive: bool) -> str:
    return digest_file(path) if order_sensitive else canonical_digest(path)


@dataclass(frozen=True)
class AgreementVerdict:
    agree: bool
    digests: tuple[tuple[str, str], ...]  # (engine, digest)

    def __str__(self):
        rows = ", ".join(f"{e}={d}" for e, d in self.digests)
        return f"{'agree' if self.agree else 'disagree'} ({rows})"


def verify_agreement(
    outputs: list[tuple[str, str | os.PathLike]], order_sensitive: bool = True
) -> AgreementVerdict:
    """Compare the outputs of several engines for the same workload.

    outputs: list of (engine name, output file path).
    """
    if len(outputs) < 2:
        raise BenchError("agreement needs at least two outputs")
    digests = tuple(
        (engine, output_digest(path, order_sensitive)) for engine, path in outputs
    )
    agree = len({d for _, d in digests}) == 1
    return AgreementVerdict(agree, digests)
