"""Deterministic, seedable dataset generators.

Two shapes, mirroring the benchmark's input layouts: unstructured text
split into many files of a fixed target size, and structured item/order
tables split into a fixed number of files whose size grows with volume.

Every file's content depends only on (seed, file index), so files may
be generated in parallel without changing a single byte.
"""

from __future__ import annotations

import itertools
import math
import os
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataGenError

WORDS_PER_LINE = 12

N_CATEGORIES = 20

# Fixed-width row layouts. Constant row width lets the per-file row
# count be computed up front from a byte budget, which is what makes
# per-file generation independent and parallel-safe.
ITEM_ROW_BYTES = len("I000000001 cat00 10.00 000\n")
ORDER_ROW_BYTES = len("O000000001 I000000001 C0000001 01 100.00\n")


@dataclass(frozen=True)
class TextCorpusSpec:
    """Unstructured word corpus: many files of a fixed target volume."""

    total_bytes: int
    target_file_bytes: int = 5_000_000  # desk-scale analog of the 500 MB layout
    vocabulary: int = 20_000
    zipf_exponent: float = 1.1
    seed: int = 0

    def __post_init__(self):
        if self.total_bytes < self.target_file_bytes:
            raise DataGenError("total_bytes must be >= target_file_bytes")
        if self.vocabulary < 2:
            raise DataGenError("vocabulary must hold at least 2 words")


@dataclass(frozen=True)
class TableSpec:
    """Structured item/order tables: a fixed number of files per table."""

    total_bytes: int
    files_per_table: int = 4
    item_fraction: float = 0.62
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.item_fraction < 1:
            raise DataGenError("item_fraction must be in (0, 1)")
        if self.files_per_table < 1:
            raise DataGenError("files_per_table must be >= 1")
        if self.total_bytes < self.files_per_table * (ITEM_ROW_BYTES + ORDER_ROW_BYTES):
            raise DataGenError("total_bytes too small for one row per file")


def build_vocabulary(size: int) -> list[str]:
    """Deterministic pseudo-word list: 'a'..'z', 'aa', 'ab', ..."""
    words = []
    for length in itertools.count(1):
        for combo in itertools.product(string.ascii_lowercase, repeat=length):
            words.append("".join(combo))
            if len(words) == size:
                return words


def zipf_probabilities(size: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, size + 1, dtype=np.float64)
    weights = ranks ** -exponent
    return weights / weights.sum()


def _write_text_file(path: Path, target_bytes: int, vocab: np.ndarray,
                     probs: np.ndarray, seed: int, index: int) -> tuple[int, int]:
    rng = np.random.default_rng([seed, index])
    block = 200_000
    written = 0
    records = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        while written < target_bytes:
            draws = vocab[rng.choice(len(vocab), size=block, p=probs)].tolist()
            lines = [
                " ".join(draws[j : j + WORDS_PER_LINE])
                for j in range(0, block, WORDS_PER_LINE)
            ]
            text = "\n".join(lines) + "\n"
            if written + len(text) <= target_bytes:
                f.write(text)
                written += len(text)
                records += len(lines)
            else:
                # Final block: stop at the word that reaches the target.
                pending: list[str] = []
                for word in draws:
                    pending.append(word)
                    written += len(word) + 1
                    if len(pending) == WORDS_PER_LINE:
                        f.write(" ".join(pending) + "\n")
                        records += 1
                        pending.clear()
                    if written >= target_bytes:
                        break
                if pending:
                    f.write(" ".join(pending) + "\n")
                    records += 1
    return records, os.path.getsize(path)


def gen_text(spec: TextCorpusSpec, out_dir: str | os.PathLike) -> list[dict]:
    """Generate the word corpus; returns a manifest of (path, bytes, records)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_files = math.ceil(spec.total_bytes / spec.target_file_bytes)
    per_file = spec.total_bytes // n_files
    vocab = np.array(build_vocabulary(spec.vocabulary))
    probs = zipf_probabilities(spec.vocabulary, spec.zipf_exponent)
    manifest = []
    for i in range(n_files):
        target = per_file if i < n_files - 1 else spec.total_bytes - per_file * (n_files - 1)
        path = out / f"text_{i:05d}.txt"
        records, nbytes = _write_text_file(path, target, vocab, probs, spec.seed, i)
        manifest.append({"path": str(path), "bytes": nbytes, "records": records})
    return manifest


def _item_rows(first_id: int, n: int, rng) -> list[str]:
    cats = rng.integers(0, N_CATEGORIES, size=n)
    cents = rng.integers(1000, 10000, size=n)  # price 10.00 .. 99.99
    stocks = rng.integers(0, 1000, size=n)
    return [
        f"I{first_id + i:09d} cat{c:02d} {p // 100:02d}.{p % 100:02d} {s:03d}\n"
        for i, (c, p, s) in enumerate(zip(cats.tolist(), cents.tolist(), stocks.tolist()))
    ]


def _order_rows(first_id: int, n: int, n_items: int, rng) -> list[str]:
    iids = rng.integers(1, n_items + 1, size=n)
    custs = rng.integers(0, 10_000_000, size=n)
    qtys = rng.integers(1, 100, size=n)
    cents = rng.integers(10000, 100000, size=n)  # total 100.00 .. 999.99
    return [
        f"O{first_id + i:09d} I{iid:09d} C{cu:07d} {q:02d} {t // 100:03d}.{t % 100:02d}\n"
        for i, (iid, cu, q, t) in enumerate(
            zip(iids.tolist(), custs.tolist(), qtys.tolist(), cents.tolist())
        )
    ]


def _rows_per_file(total_rows: int, n_files: int, index: int) -> tuple[int, int]:
    base = total_rows // n_files
    extra = total_rows % n_files
    rows = base + (1 if index < extra else 0)
    start = base * index + min(index, extra)
    return start, rows


def gen_tables(spec: TableSpec, out_dir: str | os.PathLike) -> list[dict]:
    """Generate item and order tables; returns a manifest.

    Every order row's item key references an existing item id, so the
    foreign-key set is a subset of the item primary keys by construction.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    item_rows = max(spec.files_per_table, round(spec.total_bytes * spec.item_fraction / ITEM_ROW_BYTES))
    order_rows = max(spec.files_per_table, round(spec.total_bytes * (1 - spec.item_fraction) / ORDER_ROW_BYTES))
    manifest = []
    for table_tag, (table, total_rows, make_rows) in enumerate(
        (
            ("item", item_rows, lambda start, n, rng: _item_rows(start, n, rng)),
            ("order", order_rows, lambda start, n, rng: _order_rows(start, n, item_rows, rng)),
        ),
        1,
    ):
        for i in range(spec.files_per_table):
            start, rows = _rows_per_file(total_rows, spec.files_per_table, i)
            rng = np.random.default_rng([spec.seed, table_tag, i])
            path = out / f"{table}_{i}.txt"
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.writelines(make_rows(start + 1, rows, rng))
            manifest.append(
                {"path": str(path), "bytes": os.path.getsize(path), "records": rows}
            )
    return manifest


def write_manifest(path: str | os.PathLike, manifest: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for entry in manifest:
            f.write(f"{entry['path']} {entry['bytes']} {entry['records']}\n")


def read_manifest(path: str | os.PathLike) -> list[dict]:
    manifest = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            p, b, r = line.split()
            manifest.append({"path": p, "bytes": int(b), "records": int(r)})
    return manifest
