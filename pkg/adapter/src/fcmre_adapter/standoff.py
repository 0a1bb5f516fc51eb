"""Stand-off mention/relation records paired with CoNLL-U sentences.

File format: one JSON object with a ``sentences`` list. Mention spans are
half-open and 1-based when ``unit`` is ``"token"`` (the default), or
character offsets into the sentence's text when ``unit`` is ``"char"``.
The head is a 1-based token index inside the span; when omitted, the last
token of the span is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .conllu import ConlluSentence


class StandoffError(ValueError):
    """Malformed standoff file or unresolvable span; message names the sentence."""


@dataclass(frozen=True)
class StandoffMention:
    mid: str
    start: int
    end: int
    head: int | None
    etype: str
    unit: str = "token"


@dataclass
class StandoffSentence:
    sid: str
    mentions: list[StandoffMention] = field(default_factory=list)
    relations: list[tuple[str, str, str]] = field(default_factory=list)


def read_standoff(path: str) -> dict[str, StandoffSentence]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StandoffError(f"{path}: malformed JSON ({exc.msg})") from None
    if not isinstance(data, dict) or not isinstance(data.get("sentences"), list):
        raise StandoffError(f"{path}: expected an object with a 'sentences' list")
    out: dict[str, StandoffSentence] = {}
    for s_i, raw in enumerate(data["sentences"]):
        where = f"{path}: sentences[{s_i}]"
        if not isinstance(raw, dict) or not isinstance(raw.get("id"), str):
            raise StandoffError(f"{where}: missing sentence id")
        sid = raw["id"]
        if sid in out:
            raise StandoffError(f"{where}: duplicate sentence id {sid!r}")
        record = StandoffSentence(sid=sid)
        for m_i, rm in enumerate(raw.get("mentions", [])):
            try:
                unit = rm.get("unit", "token")
                if unit not in ("token", "char"):
                    raise KeyError(f"bad unit {unit!r}")
                mention = StandoffMention(
                    mid=rm["id"], start=int(rm["start"]), end=int(rm["end"]),
                    head=int(rm["head"]) if "head" in rm else None,
                    etype=str(rm.get("type", "")), unit=unit)
            except (KeyError, TypeError, ValueError) as exc:
                raise StandoffError(
                    f"{where}: mentions[{m_i}]: {exc}") from None
            record.mentions.append(mention)
        for r_i, rr in enumerate(raw.get("relations", [])):
            try:
                record.relations.append((rr["m1"], rr["m2"], rr["label"]))
            except (KeyError, TypeError) as exc:
                raise StandoffError(
                    f"{where}: relations[{r_i}]: missing {exc}") from None
        out[sid] = record
    return out


def token_char_offsets(sentence: ConlluSentence) -> list[tuple[int, int]]:
    """(start, end) character span of each token within the sentence text.

    Tokens are aligned left to right, skipping whitespace between them; a
    form that cannot be matched at the cursor is a format error.
    """
    text = sentence.detokenized()
    offsets = []
    cursor = 0
    for tok in sentence.tokens:
        while cursor < len(text) and text[cursor].isspace():
            cursor += 1
        if not text.startswith(tok.form, cursor):
            raise StandoffError(
                f"sentence {sentence.sid!r}: token {tok.tid} ({tok.form!r}) "
                "does not align with the sentence text")
        offsets.append((cursor, cursor + len(tok.form)))
        cursor += len(tok.form)
    return offsets


def resolve_token_span(mention: StandoffMention, sentence: ConlluSentence
                       ) -> tuple[int, int]:
    """1-based half-open token span of ``mention`` within ``sentence``."""
    n = len(sentence)
    if mention.unit == "token":
        start, end = mention.start, mention.end
        if not (1 <= start < end <= n + 1):
            raise StandoffError(
                f"sentence {sentence.sid!r}: mention {mention.mid!r} token span "
                f"[{start}, {end}) outside the sentence")
        return start, end
    offsets = token_char_offsets(sentence)
    starts = {s: i for i, (s, _) in enumerate(offsets)}
    ends = {e: i for i, (_, e) in enumerate(offsets)}
    if mention.start not in starts or mention.end not in ends:
        raise StandoffError(
            f"sentence {sentence.sid!r}: mention {mention.mid!r} character span "
            f"[{mention.start}, {mention.end}) does not land on token boundaries")
    first, last = starts[mention.start], ends[mention.end]
    if last < first:
        raise StandoffError(
            f"sentence {sentence.sid!r}: mention {mention.mid!r} character span "
            "is empty")
    return first + 1, last + 2
