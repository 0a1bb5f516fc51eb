"""Conversions into the engine's JSONL corpus schema (one sentence per line).

The output schema is the relation-extraction engine's external interface:

    {"id": str,
     "tokens": [{"form", "pos", "ne", "head", "deprel"}...],   # head 0 = root
     "mentions": [{"id", "start", "end", "head", "type"}...],  # 1-based, half-open
     "relations": [{"m1", "m2", "label"}...],
     "schema": 1}

Conversions are pure functions of their inputs, so converting the same
files twice yields byte-identical output.
"""

from __future__ import annotations

import json
import logging

from .conllu import ConlluSentence, read_conllu
from .semeval import SemevalRecord, read_semeval
from .standoff import StandoffSentence, read_standoff, resolve_token_span

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class AdapterError(ValueError):
    """Input files that cannot be converted; message names the offending record."""


def conllu_sentence_record(sentence: ConlluSentence,
                           standoff: StandoffSentence | None) -> dict:
    tokens = [{"form": t.form,
               "pos": t.upos if t.upos != "_" else t.xpos,
               "ne": "",
               "head": t.head,
               "deprel": t.deprel} for t in sentence.tokens]
    mentions = []
    mention_ids = set()
    if standoff is not None:
        for m in standoff.mentions:
            start, end = resolve_token_span(m, sentence)
            head = m.head if m.head is not None else end - 1
            if not (start <= head < end):
                raise AdapterError(
                    f"sentence {sentence.sid!r}: mention {m.mid!r} head {head} "
                    f"outside its span [{start}, {end})")
            mentions.append({"id": m.mid, "start": start, "end": end,
                             "head": head, "type": m.etype})
            mention_ids.add(m.mid)
        for m1, m2, _ in standoff.relations:
            for mid in (m1, m2):
                if mid not in mention_ids:
                    raise AdapterError(
                        f"sentence {sentence.sid!r}: relation references unknown "
                        f"mention {mid!r}")
    relations = [{"m1": m1, "m2": m2, "label": label}
                 for m1, m2, label in (standoff.relations if standoff else [])]
    return {"id": sentence.sid, "tokens": tokens, "mentions": mentions,
            "relations": relations, "schema": SCHEMA_VERSION}


def convert_conllu(conllu_path: str, standoff_path: str | None,
                   out_path: str) -> int:
    """Merge a CoNLL-U file with stand-off annotations into engine JSONL.

    Sentence ids must align: every standoff record must name a CoNLL-U
    sentence. CoNLL-U sentences without annotations are emitted with empty
    mention and relation lists. Returns the number of sentences written.
    """
    sentences = read_conllu(conllu_path)
    standoff = read_standoff(standoff_path) if standoff_path else {}
    by_id = {s.sid: s for s in sentences}
    unmatched = sorted(set(standoff) - set(by_id))
    if unmatched:
        raise AdapterError(
            f"{standoff_path}: standoff sentence ids not present in "
            f"{conllu_path}: {', '.join(unmatched[:5])}")
    with open(out_path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            record = conllu_sentence_record(sentence, standoff.get(sentence.sid))
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(sentences)


def _flat_tree(n: int) -> list[int]:
    """Degenerate parse: first token is the root, everything else hangs off it."""
    return [0] + [1] * (n - 1)


def semeval_record_to_json(record: SemevalRecord,
                           parse: ConlluSentence | None) -> dict:
    n = len(record.tokens)
    if parse is not None:
        if len(parse) != n:
            raise AdapterError(
                f"record {record.rid}: external parse has {len(parse)} tokens, "
                f"marker sentence has {n}")
        if [t.form for t in parse.tokens] != list(record.tokens):
            raise AdapterError(
                f"record {record.rid}: external parse token forms do not match")
        tokens = [{"form": t.form,
                   "pos": t.upos if t.upos != "_" else t.xpos,
                   "ne": "",
                   "head": t.head,
                   "deprel": t.deprel} for t in parse.tokens]
    else:
        heads = _flat_tree(n)
        tokens = [{"form": form, "pos": "", "ne": "", "head": heads[i],
                   "deprel": "dep" if heads[i] else "root"}
                  for i, form in enumerate(record.tokens)]
    mentions = []
    for mid, (start, end) in (("e1", record.e1), ("e2", record.e2)):
        mentions.append({"id": mid, "start": start, "end": end,
                         "head": end - 1, "type": ""})  # head: last token of span
    if record.e1[1] - 1 == record.e2[1] - 1:
        raise AdapterError(f"record {record.rid}: entity spans share a head token")
    return {"id": record.rid, "tokens": tokens, "mentions": mentions,
            "relations": [{"m1": "e1", "m2": "e2", "label": record.label}],
            "schema": SCHEMA_VERSION}


def convert_semeval(in_path: str, out_path: str,
                    parses_path: str | None = None) -> int:
    """Convert the entity-marker release format into engine JSONL.

    Dependency annotations must come from an external parser run supplied
    via ``parses_path`` (CoNLL-U, aligned by record order); without one, a
    degenerate flat tree is emitted and a warning logged. Head words use
    the last token of each marked span. Returns the record count.
    """
    records = read_semeval(in_path)
    parses: list[ConlluSentence] | None = None
    if parses_path:
        parses = read_conllu(parses_path)
        if len(parses) != len(records):
            raise AdapterError(
                f"{parses_path}: {len(parses)} parses for {len(records)} records")
    else:
        logger.warning("no external parses supplied; emitting flat dependency "
                       "trees (a real parser run is recommended)")
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, record in enumerate(records):
            obj = semeval_record_to_json(record, parses[i] if parses else None)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return len(records)
