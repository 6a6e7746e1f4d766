"""Single-node streaming commands over text-record streams.

Streams are iterators of record lines without the trailing newline.
Every operation is a sequential transformer; nothing here shares
mutable state, so distinct streams may be processed on distinct
threads freely.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import os
import tempfile
from decimal import Decimal
from typing import IO, Iterable, Iterator

from .errors import (
    LeanstackError,
    NumericFieldError,
    OrderViolationError,
    RecordError,
    ScratchError,
)
from .records import KeyRange, line_key_func, numeric_value

# Spilled-run merges never open more than this many streams at once;
# deeper run sets are merged hierarchically.
MERGE_FAN_IN = 64

_SPILL_BLOCK = 2048  # records per budget-accounting block


def read_lines(source: IO[str] | str | os.PathLike) -> Iterator[str]:
    """Yield record lines (newline stripped) from a path or open file."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="\n") as f:
            for line in f:
                yield line.rstrip("\n")
    else:
        for line in source:
            yield line.rstrip("\n")


_WRITE_BATCH = 8192  # lines joined per write() call


def write_lines(path: str | os.PathLike, lines: Iterable[str]) -> tuple[int, int]:
    """Write a record stream to a file; returns (records, bytes)."""
    count = 0
    nbytes = 0
    it = iter(lines)
    with open(path, "wb") as f:
        while True:
            batch = list(itertools.islice(it, _WRITE_BATCH))
            if not batch:
                break
            data = ("\n".join(batch) + "\n").encode("utf-8")
            f.write(data)
            nbytes += len(data)
            count += len(batch)
    return count, nbytes


def check_sorted(
    lines: Iterable[str], key: KeyRange, stream: str | int | None = None
) -> Iterator[str]:
    """Pass records through, raising at the first order violation."""
    keyf = line_key_func(key)
    descending = key.descending
    prev = None
    n = 0
    for line in lines:
        n += 1
        k = keyf(line)
        if prev is not None and ((k > prev) if descending else (k < prev)):
            where = f"stream {stream} " if stream is not None else ""
            raise OrderViolationError(
                f"input {where}not sorted at record {n}: {line!r}",
                stream=stream,
                record_no=n,
            )
        prev = k
        yield line


def _sort_chunk(chunk: list[str], key: KeyRange) -> None:
    # Single-field streams (tokenized text) sort as raw lines, which is
    # both faster and byte-equivalent to keyed sorting.
    if (
        key.start == 1
        and key.stop == 1
        and not key.numeric
        and not key.descending
        and all(" " not in l for l in chunk)
    ):
        chunk.sort()
    else:
        chunk.sort(key=line_key_func(key), reverse=key.descending)


def _write_run(chunk: list[str], tmpdir: str | None) -> str:
    try:
        fd, path = tempfile.mkstemp(prefix="leanstack-run-", suffix=".txt", dir=tmpdir)
        with os.fdopen(fd, "wb") as f:
            for base in range(0, len(chunk), _WRITE_BATCH):
                f.write(
                    ("\n".join(chunk[base : base + _WRITE_BATCH]) + "\n").encode("utf-8")
                )
    except OSError as exc:
        raise ScratchError(f"cannot spill sort run: {exc}") from exc
    return path


def _block_file_lines(f: IO[str], block: int = 1 << 20) -> Iterator[str]:
    # Line iterator backed by block reads; chain.from_iterable keeps
    # per-record iteration at C speed.
    def blocks():
        tail = ""
        while True:
            chunk = f.read(block)
            if not chunk:
                break
            lines = (tail + chunk).split("\n")
            tail = lines.pop()
            if lines:
                yield lines
        if tail:
            yield [tail]

    return itertools.chain.from_iterable(blocks())


def _merge_runs(run_paths: list[str], key: KeyRange) -> Iterator[str]:
    files = [open(p, "r", encoding="utf-8", newline="\n") for p in run_paths]
    try:
        yield from dmerge([_block_file_lines(f) for f in files], key, names=run_paths)
    finally:
        for f in files:
            f.close()


def msort(
    lines: Iterable[str],
    key: KeyRange,
    mem_budget: int | None = None,
    tmpdir: str | None = None,
) -> Iterator[str]:
    """Stable sort of a record stream on the key columns.

    Input exceeding ``mem_budget`` bytes is spilled as sorted runs to
    scratch storage and k-way merged, so output is byte-identical
    regardless of the budget.
    """
    if mem_budget is not None and mem_budget <= 0:
        raise LeanstackError(f"memory budget must be positive, got {mem_budget}")
    if mem_budget is None:
        # No budget: skip per-record size accounting entirely.
        chunk = list(lines)
        _sort_chunk(chunk, key)
        yield from chunk
        return
    chunk: list[str] = []
    size = 0
    runs: list[str] = []
    it = iter(lines)
    try:
        while True:
            # Budget accounting at block granularity; a run may overrun
            # the budget by at most one block of records.
            block = list(itertools.islice(it, _SPILL_BLOCK))
            if not block:
                break
            chunk.extend(block)
            size += sum(map(len, block)) + len(block)
            if size > mem_budget:
                _sort_chunk(chunk, key)
                runs.append(_write_run(chunk, tmpdir))
                chunk = []
                size = 0
        _sort_chunk(chunk, key)
        if not runs:
            yield from chunk
            return
        if chunk:
            runs.append(_write_run(chunk, tmpdir))
            chunk = []
        # Hierarchical merge keeps the open-file fan-in bounded.
        while len(runs) > MERGE_FAN_IN:
            merged = _write_run(list(_merge_runs(runs[:MERGE_FAN_IN], key)), tmpdir)
            for p in runs[:MERGE_FAN_IN]:
                os.unlink(p)
            runs = [merged] + runs[MERGE_FAN_IN:]
        yield from _merge_runs(runs, key)
    finally:
        for p in runs:
            try:
                os.unlink(p)
            except OSError:
                pass


def lcnt(lines: Iterable[str]) -> int:
    """Count the records in a stream."""
    n = 0
    for _ in lines:
        n += 1
    return n


def _sorted_groups(lines: Iterable[str], key: KeyRange, stream=None):
    """Group a key-sorted stream; detects order violations at group
    boundaries (adjacent equal keys coalesce, so group keys of a sorted
    stream are strictly monotone)."""
    keyf = line_key_func(key)
    descending = key.descending
    prev = None
    n = 0
    for k, group in itertools.groupby(lines, key=keyf):
        if prev is not None and ((k > prev) if descending else (k < prev)):
            where = f"stream {stream} " if stream is not None else ""
            raise OrderViolationError(
                f"input {where}not sorted at record {n + 1}",
                stream=stream,
                record_no=n + 1,
            )
        rows = list(group)
        n += len(rows)
        prev = k
        yield k, rows


def count_by_key(lines: Iterable[str], key: KeyRange) -> Iterator[str]:
    """One record per distinct key: key columns plus the group size."""
    start, stop = key.start, key.stop
    if start == 1 and stop == 1 and not key.numeric and not key.descending:
        # Group identical raw lines at C speed, then coalesce adjacent
        # runs that share column 1 (multi-field lines with equal keys
        # but different tails form separate raw-line runs).
        cur: str | None = None
        n = 0
        rec = 0
        for line, group in itertools.groupby(lines):
            m = len(list(group))
            rec += m
            col = line.split(" ", 1)[0] if " " in line else line
            if col == cur:
                n += m
                continue
            if cur is not None:
                if col < cur:
                    _order_violation(None, rec - m + 1, line)
                yield f"{cur} {n}"
            cur = col
            n = m
        if cur is not None:
            yield f"{cur} {n}"
        return
    for _, rows in _sorted_groups(lines, key):
        head = rows[0].split(" ")[start - 1 : stop]
        yield " ".join(head) + f" {len(rows)}"


def _numeric(token: str) -> int | Decimal:
    # Integer sums stay integers; anything fractional goes through Decimal.
    try:
        return int(token)
    except ValueError:
        return numeric_value(token)


def sm2(lines: Iterable[str], key: KeyRange, sums: KeyRange) -> Iterator[str]:
    """Per-key numeric sums: key columns followed by one total per sum column."""
    if max(key.start, sums.start) <= min(key.stop, sums.stop):
        raise LeanstackError(
            f"key columns {key.start}/{key.stop} overlap sum columns "
            f"{sums.start}/{sums.stop}"
        )
    kstart, kstop = key.start, key.stop
    sstart, sstop = sums.start, sums.stop
    for _, rows in _sorted_groups(lines, key):
        totals: list = [0] * (sstop - sstart + 1)
        for row in rows:
            fields = row.split(" ")
            if len(fields) < sstop:
                raise RecordError(
                    f"record has {len(fields)} fields, sum needs column {sstop}: {row!r}"
                )
            for i, tok in enumerate(fields[sstart - 1 : sstop]):
                totals[i] += _numeric(tok)
        head = rows[0].split(" ")[kstart - 1 : kstop]
        yield " ".join(head) + " " + " ".join(str(t) for t in totals)


def _order_violation(stream, record_no: int, line: str):
    where = f"stream {stream} " if stream is not None else ""
    raise OrderViolationError(
        f"input {where}not sorted at record {record_no}: {line!r}",
        stream=stream,
        record_no=record_no,
    )


def _heap_merge_checked(
    streams: list[Iterable[str]],
    keyf,
    names: list,
    prevs: list | None = None,
    counts: list[int] | None = None,
) -> Iterator[str]:
    """Ascending k-way merge verifying each stream's order as it drains.

    ``prevs``/``counts`` seed per-stream last-seen keys and record numbers
    when a prefix of the streams was consumed elsewhere.
    """
    k = len(streams)
    if prevs is None:
        prevs = [None] * k
    if counts is None:
        counts = [0] * k
    its = [iter(s) for s in streams]
    heap = []
    for i in range(k):
        line = next(its[i], None)
        if line is None:
            continue
        kk = keyf(line)
        counts[i] += 1
        pv = prevs[i]
        if pv is not None and kk < pv:
            _order_violation(names[i], counts[i], line)
        heap.append((kk, i, line))
    heapq.heapify(heap)
    heappop, heapreplace = heapq.heappop, heapq.heapreplace
    while heap:
        kk, i, line = heap[0]
        yield line
        nxt = next(its[i], None)
        if nxt is None:
            heappop(heap)
        else:
            k2 = keyf(nxt)
            counts[i] += 1
            if k2 < kk:
                _order_violation(names[i], counts[i], nxt)
            heapreplace(heap, (k2, i, nxt))


_MERGE_BLOCK = 32768  # records buffered per stream in the block merge


def _first_violation(buf: list[str], prev: str | None) -> int:
    last = prev
    for j, line in enumerate(buf):
        if last is not None and line < last:
            return j
        last = line
    return len(buf)  # unreachable when a violation is known to exist


def _block_merge_single_field(
    streams: list[Iterable[str]], names: list
) -> Iterator[str]:
    """Merge column-1-sorted streams of single-field records in blocks.

    Single-field records compare as raw lines, so whole blocks can be
    bound-limited, concatenated, and stably sorted at C speed. The first
    multi-field record hands the remaining data to the keyed heap merge,
    where raw-line order and column-1 order can diverge.
    """
    k = len(streams)
    its = [iter(s) for s in streams]
    bufs: list[list[str]] = [[] for _ in range(k)]
    counts = [0] * k
    lasts: list[str | None] = [None] * k
    live = [True] * k
    while True:
        for i in range(k):
            if not live[i] or bufs[i]:
                continue
            buf = list(itertools.islice(its[i], _MERGE_BLOCK))
            if not buf:
                live[i] = False
                continue
            if any(" " in line for line in buf):
                # Hand everything not yet emitted to the keyed merge.
                # Buffered records from other streams are already order-
                # verified; re-checking them among themselves is harmless.
                keyf = line_key_func(KeyRange(1, 1, False, False))
                sources = []
                prevs: list = []
                base_counts = []
                for j in range(k):
                    pend = buf if j == i else bufs[j]
                    src = itertools.chain(pend, its[j]) if live[j] else iter(pend)
                    sources.append(src)
                    prevs.append(lasts[j] if j == i else None)
                    base_counts.append(counts[j])
                yield from _heap_merge_checked(
                    sources, keyf, names, prevs=prevs, counts=base_counts
                )
                return
            prev = lasts[i]
            if (prev is not None and buf[0] < prev) or buf != sorted(buf):
                j = _first_violation(buf, prev)
                _order_violation(names[i], counts[i] + j + 1, buf[j])
            counts[i] += len(buf)
            lasts[i] = buf[-1]
            bufs[i] = buf
        live_maxes = [bufs[i][-1] for i in range(k) if live[i]]
        if not live_maxes:
            batch: list[str] = []
            for buf in bufs:
                batch.extend(buf)
            batch.sort()
            yield from batch
            return
        bound = min(live_maxes)
        batch = []
        for i in range(k):
            buf = bufs[i]
            if not buf:
                continue
            cut = bisect.bisect_right(buf, bound)
            if cut == len(buf):
                batch.extend(buf)
                bufs[i] = []
            elif cut:
                batch.extend(buf[:cut])
                bufs[i] = buf[cut:]
        # Stable sort keeps equal keys in input-stream order.
        batch.sort()
        yield from batch


def dmerge(
    inputs: list[Iterable[str]], key: KeyRange, names: list | None = None
) -> Iterator[str]:
    """K-way merge of individually sorted streams; ties keep input order."""
    if names is None:
        names = list(range(1, len(inputs) + 1))
    if key.descending:
        checked = [check_sorted(s, key, stream=nm) for s, nm in zip(inputs, names)]
        # heapq.merge is stable: equal keys come out in input-stream order.
        return heapq.merge(*checked, key=line_key_func(key), reverse=True)
    if key.start == 1 and key.stop == 1 and not key.numeric:
        return _block_merge_single_field(list(inputs), names)
    return _heap_merge_checked(list(inputs), line_key_func(key), names)


def tokenize(chunks: Iterable[str]) -> Iterator[str]:
    """Split a text stream into one single-field record per word."""
    tail = ""
    for chunk in chunks:
        buf = tail + chunk
        words = buf.split()
        if buf and not buf[-1].isspace() and words:
            tail = words.pop()
        else:
            tail = ""
        yield from words
    if tail:
        yield tail


def grep_count(lines: Iterable[str], needle: str) -> int:
    """Non-overlapping occurrences of needle; matches never span lines."""
    if not needle:
        raise LeanstackError("grep needle must be non-empty")
    return sum(line.count(needle) for line in lines)


def select_rows(
    lines: Iterable[str], column: int, threshold: str | Decimal
) -> Iterator[str]:
    """Records whose numeric column strictly exceeds the threshold, in order."""
    if column < 1:
        raise RecordError(f"column index must be >= 1, got {column}")
    bound = numeric_value(str(threshold))
    for line in lines:
        fields = line.split(" ")
        if len(fields) < column:
            raise RecordError(
                f"record has {len(fields)} fields, select needs column {column}: {line!r}"
            )
        if numeric_value(fields[column - 1]) > bound:
            yield line


def _strip_key(fields: list[str], key: KeyRange) -> list[str]:
    return fields[: key.start - 1] + fields[key.stop :]


def merge_join(
    left: Iterable[str],
    right: Iterable[str],
    key_left: KeyRange,
    key_right: KeyRange,
) -> Iterator[str]:
    """Inner sort-merge join; emits left fields then right non-key fields.

    Output is ordered by join key, left-major within each key group.
    Keys are compared lexicographically.
    """
    if key_left.numeric or key_right.numeric:
        raise LeanstackError("join keys are compared lexicographically")
    if key_left.descending or key_right.descending:
        raise LeanstackError("join inputs must be sorted ascending")
    lgroups = _sorted_groups(left, key_left, stream="left")
    rgroups = _sorted_groups(right, key_right, stream="right")
    lk, lrows = next(lgroups, (None, None))
    rk, rrows = next(rgroups, (None, None))
    while lrows is not None and rrows is not None:
        if lk < rk:
            lk, lrows = next(lgroups, (None, None))
        elif lk > rk:
            rk, rrows = next(rgroups, (None, None))
        else:
            tails = [" ".join(_strip_key(r.split(" "), key_right)) for r in rrows]
            for lrow in lrows:
                for tail in tails:
                    yield lrow + " " + tail if tail else lrow
            lk, lrows = next(lgroups, (None, None))
            rk, rrows = next(rgroups, (None, None))
    # Drain remaining groups so late order violations still surface.
    for _ in lgroups:
        pass
    for _ in rgroups:
        pass
