"""Reader for the entity-marker relation-classification release format.

Records look like::

    1\t"The <e1>factory</e1> sits near the <e2>river</e2>."
    Component-Whole(e1,e2)
    Comment: optional free text

separated by blank lines. Entities may span several whitespace tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class SemevalFormatError(ValueError):
    """Malformed marker-format record; message names the record id or line."""


_MARKERS = ("<e1>", "</e1>", "<e2>", "</e2>")
_MARKER_RE = re.compile("|".join(re.escape(m) for m in _MARKERS))


@dataclass(frozen=True)
class SemevalRecord:
    rid: str
    tokens: tuple[str, ...]
    e1: tuple[int, int]  # 1-based half-open token span
    e2: tuple[int, int]
    label: str


def _parse_sentence(rid: str, text: str) -> tuple[tuple[str, ...],
                                                  tuple[int, int], tuple[int, int]]:
    if text.startswith('"') and text.endswith('"'):
        text = text[1:-1]
    spans: dict[str, list[int | None]] = {"e1": [None, None], "e2": [None, None]}
    tokens: list[str] = []
    for raw in text.split():
        opens = [m[1:-1] for m in ("<e1>", "<e2>") if m in raw]
        closes = [m[2:-1] for m in ("</e1>", "</e2>") if m in raw]
        clean = _MARKER_RE.sub("", raw)
        if clean:
            tokens.append(clean)
        for name in opens:
            if spans[name][0] is not None:
                raise SemevalFormatError(f"record {rid}: duplicate <{name}> marker")
            # attached marker covers this token; a bare one opens at the next
            spans[name][0] = len(tokens) if clean else len(tokens) + 1
        for name in closes:
            if spans[name][1] is not None:
                raise SemevalFormatError(f"record {rid}: duplicate </{name}> marker")
            spans[name][1] = len(tokens) + 1
    for name in ("e1", "e2"):
        start, end = spans[name]
        if start is None or end is None:
            raise SemevalFormatError(f"record {rid}: missing {name} markers")
        if not (1 <= start < end <= len(tokens) + 1):
            raise SemevalFormatError(f"record {rid}: bad {name} span")
    return tuple(tokens), (spans["e1"][0], spans["e1"][1]), \
        (spans["e2"][0], spans["e2"][1])


def parse_semeval(text: str, source: str = "<string>") -> list[SemevalRecord]:
    records: list[SemevalRecord] = []
    block: list[str] = []

    def flush() -> None:
        if not block:
            return
        header = block[0]
        rid, tab, sentence = header.partition("\t")
        if not tab:
            raise SemevalFormatError(
                f"{source}: record starting {header[:40]!r} lacks an id column")
        label = None
        for line in block[1:]:
            if line.startswith("Comment"):
                continue
            label = line.strip()
            break
        if not label:
            raise SemevalFormatError(f"{source}: record {rid}: missing label line")
        tokens, e1, e2 = _parse_sentence(rid.strip(), sentence.strip())
        records.append(SemevalRecord(rid=rid.strip(), tokens=tokens, e1=e1, e2=e2,
                                     label=label))
        block.clear()

    for raw in text.splitlines():
        line = raw.strip("﻿").rstrip()
        if not line.strip():
            flush()
            continue
        block.append(line)
    flush()
    return records


def read_semeval(path: str) -> list[SemevalRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_semeval(fh.read(), source=path)
