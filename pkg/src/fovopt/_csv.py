"""Shared CSV reading: ``#`` comment lines, required columns, real line numbers."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterator, Sequence

from .errors import InputError


def read_table(path: str | Path, required: Sequence[str], what: str = "table"
               ) -> tuple[list[str], Iterator[tuple[int, dict[str, str]]]]:
    """Return ``(comments, rows)``; rows yield ``(line_number, {column: text})``.

    Comment lines start with ``#`` and are returned without the marker.
    Blank lines are skipped.  The file is read eagerly so the handle is
    closed on return.
    """
    src = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {what}: {exc.strerror}", path=src) from exc
    comments: list[str] = []
    body: list[tuple[int, str]] = []
    for i, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append((i, line))
    if not body:
        raise InputError(f"empty {what}", path=src, line=1)
    head_line, head = body[0]
    header = [h.strip() for h in next(csv.reader([head]))]
    missing = [f for f in required if f not in header]
    if missing:
        raise InputError(f"missing columns {missing}", path=src, line=head_line)

    def rows():
        for lineno, line in body[1:]:
            vals = next(csv.reader([line]))
            if len(vals) != len(header):
                raise InputError(f"expected {len(header)} fields, got {len(vals)}",
                                 path=src, line=lineno)
            yield lineno, dict(zip(header, (v.strip() for v in vals)))

    return comments, rows()


def parse_float(text: str, name: str, src: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{name}: not a number: {text!r}", path=src, line=line) from None
