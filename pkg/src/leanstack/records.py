"""Text-record data model: key addressing, comparison, projection.

A record is one newline-terminated line of space-separated, non-empty
fields. Field indices are 1-based. Lexicographic comparison is by code
point, which for UTF-8 text coincides with byte order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Sequence

from .errors import KeySpecError, NumericFieldError, RecordError

# Optional sign, digits with optional fractional part. No exponent.
_NUMERIC_RE = re.compile(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)")

_KEY_RE = re.compile(r"key=(\d+)(?:/(\d+))?((?:@(?:num|desc))*)")

LESS, EQUAL, GREATER = -1, 0, 1


@dataclass(frozen=True)
class KeyRange:
    """A 1-based inclusive column span plus comparison mode and direction."""

    start: int
    stop: int
    numeric: bool = False
    descending: bool = False

    def __post_init__(self):
        if self.start < 1:
            raise KeySpecError(f"key start column must be >= 1, got {self.start}")
        if self.stop < self.start:
            raise KeySpecError(
                f"key span inverted: {self.start}/{self.stop} (start must be <= stop)"
            )

    @property
    def width(self) -> int:
        return self.stop - self.start + 1


def parse_key_spec(text: str) -> KeyRange:
    """Parse a ``key=FROM[/TO][@num][@desc]`` expression.

    TO defaults to FROM; mode defaults to lexicographic; direction
    defaults to ascending.
    """
    m = _KEY_RE.fullmatch(text.strip())
    if not m:
        raise KeySpecError(f"malformed key expression: {text!r}")
    start = int(m.group(1))
    stop = int(m.group(2)) if m.group(2) else start
    flags = set(m.group(3).split("@")[1:]) if m.group(3) else set()
    if start == 0 or stop == 0:
        raise KeySpecError(f"column indices are 1-based: {text!r}")
    return KeyRange(start, stop, numeric="num" in flags, descending="desc" in flags)


def parse_record(line: str) -> list[str]:
    """Split a record line into fields, validating the data model."""
    line = line.rstrip("\n")
    if not line:
        raise RecordError("empty line is not a valid record")
    fields = line.split(" ")
    if "" in fields:
        raise RecordError(f"record contains an empty field: {line!r}")
    return fields


def serialize_record(fields: Sequence[str]) -> str:
    """Join fields into the canonical newline-terminated line."""
    if not fields:
        raise RecordError("a record must have at least one field")
    for f in fields:
        if not f or " " in f or "\n" in f:
            raise RecordError(f"invalid field token: {f!r}")
    return " ".join(fields) + "\n"


def numeric_value(token: str) -> Decimal:
    """Parse a decimal field (optional sign, digits, optional fraction)."""
    if not _NUMERIC_RE.fullmatch(token):
        raise NumericFieldError(f"not a decimal number: {token!r}")
    return Decimal(token)


def key_of(fields: Sequence[str], key: KeyRange) -> tuple:
    """Extract the comparable key tuple of a record."""
    if len(fields) < key.stop:
        raise RecordError(
            f"record has {len(fields)} fields, key needs column {key.stop}: "
            f"{' '.join(fields)!r}"
        )
    cols = fields[key.start - 1 : key.stop]
    if key.numeric:
        return tuple(numeric_value(c) for c in cols)
    return tuple(cols)


def line_key_func(key: KeyRange):
    """Key extractor operating on raw record lines (no trailing newline).

    Single lexicographic columns yield the bare field; wider or numeric
    keys yield tuples. Both compare consistently within one key.
    """
    start, stop, numeric = key.start, key.stop, key.numeric

    if not numeric and start == stop:

        def extract(line: str) -> str:
            # maxsplit: fields beyond the key are never needed.
            fields = line.split(" ", stop)
            if len(fields) < stop:
                raise RecordError(
                    f"record has {len(fields)} fields, key needs column {stop}: {line!r}"
                )
            return fields[start - 1]

        return extract

    def extract(line: str) -> tuple:
        fields = line.split(" ", stop)
        if len(fields) < stop:
            raise RecordError(
                f"record has {len(fields)} fields, key needs column {stop}: {line!r}"
            )
        cols = fields[start - 1 : stop]
        if numeric:
            return tuple(numeric_value(c) for c in cols)
        return tuple(cols)

    return extract


def compare_records(a: Sequence[str], b: Sequence[str], key: KeyRange) -> int:
    """Compare two records over the key columns; returns -1, 0 or 1.

    Direction inverts the result, so a descending key reports its
    first record as Less when it sorts first.
    """
    ka, kb = key_of(a, key), key_of(b, key)
    if ka < kb:
        result = LESS
    elif ka > kb:
        result = GREATER
    else:
        result = EQUAL
    return -result if key.descending else result


def project(fields: Sequence[str], columns: Sequence[int]) -> list[str]:
    """Select and reorder columns; duplicates allowed, indices 1-based."""
    if not columns:
        raise RecordError("projection needs at least one column index")
    width = len(fields)
    out = []
    for c in columns:
        if c < 1 or c > width:
            raise RecordError(f"column {c} out of range for record of width {width}")
        out.append(fields[c - 1])
    return out
