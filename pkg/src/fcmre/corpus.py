"""Data model for annotated sentences, entity mentions and relation instances.

Token and span indices are 1-based in the JSONL wire format (CoNLL
convention, dependency head 0 = artificial root) and 0-based everywhere in
memory (root head = None). All types are immutable after load.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

SCHEMA_VERSION = 1


class CorpusFormatError(ValueError):
    """Malformed corpus file or invariant violation; message carries line and field."""


@dataclass(frozen=True)
class Token:
    form: str
    pos: str = ""
    ne: str = ""
    head: int | None = None  # 0-based index of the governor; None for the root
    deprel: str = ""


@dataclass(frozen=True)
class AnnotatedSentence:
    sid: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def root_index(self) -> int:
        for i, tok in enumerate(self.tokens):
            if tok.head is None:
                return i
        raise CorpusFormatError(f"sentence {self.sid!r} has no root token")

    def validate(self) -> None:
        """Check the dependency-tree invariants (single root, no cycles)."""
        n = len(self.tokens)
        if n < 1:
            raise CorpusFormatError(f"sentence {self.sid!r} has no tokens")
        roots = [i for i, t in enumerate(self.tokens) if t.head is None]
        if len(roots) != 1:
            raise CorpusFormatError(
                f"sentence {self.sid!r} has {len(roots)} root tokens, expected exactly 1")
        for i, tok in enumerate(self.tokens):
            if tok.head is None:
                continue
            if not (0 <= tok.head < n):
                raise CorpusFormatError(
                    f"sentence {self.sid!r}: tokens[{i}].head out of range")
            if tok.head == i:
                raise CorpusFormatError(
                    f"sentence {self.sid!r}: tokens[{i}] is its own head")
        for i in range(n):
            seen = set()
            cur: int | None = i
            while cur is not None:
                if cur in seen:
                    raise CorpusFormatError(
                        f"sentence {self.sid!r}: dependency cycle through tokens[{i}]")
                seen.add(cur)
                cur = self.tokens[cur].head


@dataclass(frozen=True)
class EntityMention:
    """Token span [start, end) with a designated head token, all 0-based."""
    mid: str
    start: int
    end: int
    head: int
    etype: str = ""

    def validate(self, n: int, where: str = "") -> None:
        prefix = f"{where}: " if where else ""
        if not (0 <= self.start < self.end <= n):
            raise CorpusFormatError(f"{prefix}mention {self.mid!r} span out of range")
        if not (self.start <= self.head < self.end):
            raise CorpusFormatError(f"{prefix}mention {self.mid!r} head outside its span")


@dataclass(frozen=True)
class RelationInstance:
    sentence: AnnotatedSentence
    m1: EntityMention
    m2: EntityMention
    label: str | None = None

    def validate(self, where: str = "") -> None:
        prefix = f"{where}: " if where else ""
        n = len(self.sentence)
        self.m1.validate(n, where)
        self.m2.validate(n, where)
        if self.m1.head == self.m2.head:
            raise CorpusFormatError(f"{prefix}mentions {self.m1.mid!r} and {self.m2.mid!r} "
                                    "share a head token")


@dataclass(frozen=True)
class LabelSet:
    """Ordered, unique label strings; index order is the score-vector order."""
    labels: tuple[str, ...]
    nil_label: str | None = None
    directed: bool = True
    _index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        index = {}
        for i, lab in enumerate(self.labels):
            if lab in index:
                raise ValueError(f"duplicate label {lab!r}")
            index[lab] = i
        if self.nil_label is not None and self.nil_label not in index:
            raise ValueError(f"nil label {self.nil_label!r} not among the labels")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index_of(self, label: str) -> int:
        return self._index[label]

    def get(self, label: str) -> int | None:
        return self._index.get(label)


def dependency_path(sentence: AnnotatedSentence, i: int, j: int) -> list[int]:
    """Token indices on the unique tree path from ``i`` to ``j``, inclusive.

    Found via the lowest common ancestor of the two root paths.
    """
    def root_path(k: int) -> list[int]:
        path = [k]
        cur = sentence.tokens[k].head
        while cur is not None:
            path.append(cur)
            cur = sentence.tokens[cur].head
        return path

    if i == j:
        return [i]
    up_i = root_path(i)
    up_j = root_path(j)
    on_j = {tok: depth for depth, tok in enumerate(up_j)}
    for depth_i, tok in enumerate(up_i):
        if tok in on_j:
            return up_i[:depth_i + 1] + up_j[:on_j[tok]][::-1]
    raise CorpusFormatError(
        f"sentence {sentence.sid!r}: tokens {i} and {j} are not connected")


def generate_instances(sentence: AnnotatedSentence,
                       mentions: Iterable[EntityMention],
                       labeled_pairs: Iterable[tuple[str, str, str]],
                       mode: str = "given",
                       nil_label: str | None = None,
                       max_intervening: int | None = None) -> list[RelationInstance]:
    """Build relation instances for one sentence.

    ``mode="given"`` emits exactly the labeled pairs (classification setting,
    no negative padding). ``mode="all_pairs"`` emits every ordered mention
    pair, attaching ``nil_label`` to unlabeled ones; when ``max_intervening``
    is set, pairs with more than that many other mentions between them (by
    head order) are skipped.
    """
    mentions = list(mentions)
    by_id = {m.mid: m for m in mentions}
    labels = {(a, b): lab for a, b, lab in labeled_pairs}
    for (a, b) in labels:
        if a not in by_id or b not in by_id:
            missing = a if a not in by_id else b
            raise CorpusFormatError(
                f"sentence {sentence.sid!r}: relation references unknown mention {missing!r}")

    if mode == "given":
        return [RelationInstance(sentence, by_id[a], by_id[b], lab)
                for (a, b), lab in labels.items()]
    if mode != "all_pairs":
        raise ValueError(f"unknown instance-generation mode {mode!r}")
    if nil_label is None:
        raise ValueError("all_pairs mode requires a nil_label for unlabeled pairs")

    heads = sorted(m.head for m in mentions)
    out = []
    for m1 in mentions:
        for m2 in mentions:
            if m1.mid == m2.mid:
                continue
            if m1.head == m2.head:
                continue  # nested mentions sharing a head cannot form a pair
            if max_intervening is not None:
                lo, hi = sorted((m1.head, m2.head))
                between = sum(1 for h in heads if lo < h < hi)
                if between > max_intervening:
                    continue
            label = labels.get((m1.mid, m2.mid), nil_label)
            out.append(RelationInstance(sentence, m1, m2, label))
    return out


@dataclass
class Corpus:
    """Sentences paired with their relation instances, plus the seen label set."""
    items: list[tuple[AnnotatedSentence, list[RelationInstance]]]
    labels: LabelSet

    def instances(self) -> list[RelationInstance]:
        return [inst for _, insts in self.items for inst in insts]

    def sentences(self) -> list[AnnotatedSentence]:
        return [sent for sent, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def _open_text(path: str, mode: str) -> IO[str]:
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _require(cond: bool, lineno: int, message: str) -> None:
    if not cond:
        raise CorpusFormatError(f"line {lineno}: {message}")


def parse_sentence_record(obj: dict, lineno: int = 0
                          ) -> tuple[AnnotatedSentence, list[EntityMention],
                                     list[tuple[str, str, str]]]:
    """Decode one JSONL sentence object, validating every schema invariant."""
    _require(isinstance(obj, dict), lineno, "record is not a JSON object")
    schema = obj.get("schema", SCHEMA_VERSION)
    _require(schema == SCHEMA_VERSION, lineno, f"unknown schema version {schema!r}")
    sid = obj.get("id")
    _require(isinstance(sid, str) and sid != "", lineno, "missing or empty 'id'")
    raw_tokens = obj.get("tokens")
    _require(isinstance(raw_tokens, list) and len(raw_tokens) > 0, lineno,
             "'tokens' must be a non-empty list")

    n = len(raw_tokens)
    tokens = []
    for t_i, rt in enumerate(raw_tokens):
        _require(isinstance(rt, dict), lineno, f"tokens[{t_i}] is not an object")
        form = rt.get("form")
        _require(isinstance(form, str) and form != "", lineno,
                 f"tokens[{t_i}].form missing or empty")
        head = rt.get("head")
        _require(isinstance(head, int) and not isinstance(head, bool), lineno,
                 f"tokens[{t_i}].head must be an integer")
        _require(0 <= head <= n, lineno, f"tokens[{t_i}].head out of range")
        _require(head != t_i + 1, lineno, f"tokens[{t_i}].head points at itself")
        tokens.append(Token(form=form,
                            pos=str(rt.get("pos", "")),
                            ne=str(rt.get("ne", "")),
                            head=None if head == 0 else head - 1,
                            deprel=str(rt.get("deprel", ""))))
    sentence = AnnotatedSentence(sid=sid, tokens=tuple(tokens))
    try:
        sentence.validate()
    except CorpusFormatError as exc:
        raise CorpusFormatError(f"line {lineno}: {exc}") from None

    mentions = []
    for m_i, rm in enumerate(obj.get("mentions", [])):
        _require(isinstance(rm, dict), lineno, f"mentions[{m_i}] is not an object")
        mid = rm.get("id")
        _require(isinstance(mid, str) and mid != "", lineno,
                 f"mentions[{m_i}].id missing or empty")
        for key in ("start", "end", "head"):
            v = rm.get(key)
            _require(isinstance(v, int) and not isinstance(v, bool), lineno,
                     f"mentions[{m_i}].{key} must be an integer")
        start, end, head = rm["start"], rm["end"], rm["head"]
        _require(1 <= start < end <= n + 1, lineno, f"mentions[{m_i}] span out of range")
        _require(start <= head < end, lineno, f"mentions[{m_i}].head outside its span")
        mention = EntityMention(mid=mid, start=start - 1, end=end - 1,
                                head=head - 1, etype=str(rm.get("type", "")))
        mentions.append(mention)
    ids = [m.mid for m in mentions]
    _require(len(ids) == len(set(ids)), lineno, "duplicate mention ids")

    by_id = {m.mid: m for m in mentions}
    relations = []
    for r_i, rr in enumerate(obj.get("relations", [])):
        _require(isinstance(rr, dict), lineno, f"relations[{r_i}] is not an object")
        m1, m2, label = rr.get("m1"), rr.get("m2"), rr.get("label")
        for key, val in (("m1", m1), ("m2", m2), ("label", label)):
            _require(isinstance(val, str) and val != "", lineno,
                     f"relations[{r_i}].{key} missing or empty")
        for key, val in (("m1", m1), ("m2", m2)):
            _require(val in by_id, lineno,
                     f"relations[{r_i}].{key} references unknown mention {val!r}")
        _require(by_id[m1].head != by_id[m2].head, lineno,
                 f"relations[{r_i}] pairs two mentions with the same head token")
        relations.append((m1, m2, label))
    return sentence, mentions, relations


def load_corpus(path: str, mode: str = "given", nil_label: str | None = None,
                max_intervening: int | None = None) -> Corpus:
    """Load a JSONL corpus; labels are collected in first-seen order.

    With ``mode="all_pairs"``, ``nil_label`` is appended to the label set
    (first, so an untrained model defaults to it) and unlabeled ordered
    mention pairs receive it.
    """
    items: list[tuple[AnnotatedSentence, list[RelationInstance]]] = []
    seen_labels: list[str] = []
    seen_set: set[str] = set()
    if mode == "all_pairs":
        if nil_label is None:
            raise ValueError("all_pairs mode requires a nil_label")
        seen_labels.append(nil_label)
        seen_set.add(nil_label)
    seen_sids: set[str] = set()
    with _open_text(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            sentence, mentions, relations = parse_sentence_record(obj, lineno)
            _require(sentence.sid not in seen_sids, lineno,
                     f"duplicate sentence id {sentence.sid!r}")
            seen_sids.add(sentence.sid)
            try:
                instances = generate_instances(sentence, mentions, relations, mode=mode,
                                               nil_label=nil_label,
                                               max_intervening=max_intervening)
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"line {lineno}: {exc}") from None
            for inst in instances:
                if inst.label is not None and inst.label not in seen_set:
                    seen_set.add(inst.label)
                    seen_labels.append(inst.label)
            items.append((sentence, instances))
    return Corpus(items=items, labels=LabelSet(tuple(seen_labels), nil_label=nil_label))


def sentence_to_record(sentence: AnnotatedSentence,
                       mentions: Iterable[EntityMention] = (),
                       relations: Iterable[tuple[str, str, str]] = ()) -> dict:
    """Encode a sentence back into the JSONL schema (inverse of parsing)."""
    return {
        "id": sentence.sid,
        "tokens": [{"form": t.form, "pos": t.pos, "ne": t.ne,
                    "head": 0 if t.head is None else t.head + 1,
                    "deprel": t.deprel} for t in sentence.tokens],
        "mentions": [{"id": m.mid, "start": m.start + 1, "end": m.end + 1,
                      "head": m.head + 1, "type": m.etype} for m in mentions],
        "relations": [{"m1": a, "m2": b, "label": lab} for a, b, lab in relations],
        "schema": SCHEMA_VERSION,
    }
