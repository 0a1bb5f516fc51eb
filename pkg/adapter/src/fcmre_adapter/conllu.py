"""Minimal CoNLL-U reader (10-column TSV with comment lines).

Multiword-token ranges ("1-2") and empty nodes ("1.1") are skipped, per
the usual treatment when only the basic dependency tree is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConlluFormatError(ValueError):
    """Malformed CoNLL-U input; message names the file line."""


@dataclass(frozen=True)
class ConlluToken:
    tid: int          # 1-based position in the sentence
    form: str
    lemma: str
    upos: str
    xpos: str
    feats: str
    head: int         # 0 = root
    deprel: str
    deps: str
    misc: str

    @property
    def space_after(self) -> bool:
        return "SpaceAfter=No" not in self.misc.split("|")


@dataclass
class ConlluSentence:
    sid: str
    tokens: list[ConlluToken]
    text: str | None = None
    comments: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def detokenized(self) -> str:
        """The ``# text`` comment when present, else a SpaceAfter-aware join."""
        if self.text is not None:
            return self.text
        parts = []
        for tok in self.tokens:
            parts.append(tok.form)
            if tok.space_after:
                parts.append(" ")
        return "".join(parts).rstrip(" ")


def parse_conllu(text: str, source: str = "<string>") -> list[ConlluSentence]:
    sentences: list[ConlluSentence] = []
    pending_tokens: list[ConlluToken] = []
    pending_comments: list[str] = []
    pending_sid: str | None = None
    pending_text: str | None = None

    def flush(lineno: int) -> None:
        nonlocal pending_tokens, pending_comments, pending_sid, pending_text
        if not pending_tokens:
            pending_comments = []
            pending_sid = None
            pending_text = None
            return
        sid = pending_sid if pending_sid is not None else str(len(sentences) + 1)
        n = len(pending_tokens)
        for tok in pending_tokens:
            if not (0 <= tok.head <= n):
                raise ConlluFormatError(
                    f"{source}: sentence {sid!r} token {tok.tid} head "
                    f"{tok.head} out of range (ends before line {lineno})")
        sentences.append(ConlluSentence(sid=sid, tokens=pending_tokens,
                                        text=pending_text,
                                        comments=pending_comments))
        pending_tokens = []
        pending_comments = []
        pending_sid = None
        pending_text = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            pending_comments.append(line)
            body = line[1:].strip()
            if body.startswith("sent_id"):
                _, _, value = body.partition("=")
                pending_sid = value.strip()
            elif body.startswith("text ") or body.startswith("text="):
                _, _, value = body.partition("=")
                pending_text = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluFormatError(
                f"{source}: line {lineno}: expected 10 tab-separated columns, "
                f"got {len(cols)}")
        tid_str = cols[0]
        if "-" in tid_str or "." in tid_str:
            continue  # multiword-token range or empty node
        try:
            tid = int(tid_str)
        except ValueError:
            raise ConlluFormatError(
                f"{source}: line {lineno}: bad token id {tid_str!r}") from None
        if tid != len(pending_tokens) + 1:
            raise ConlluFormatError(
                f"{source}: line {lineno}: token id {tid} out of sequence")
        head_str = cols[6]
        try:
            head = int(head_str)
        except ValueError:
            raise ConlluFormatError(
                f"{source}: line {lineno}: bad head {head_str!r}") from None
        pending_tokens.append(ConlluToken(
            tid=tid, form=cols[1], lemma=cols[2], upos=cols[3], xpos=cols[4],
            feats=cols[5], head=head, deprel=cols[7], deps=cols[8], misc=cols[9]))
    flush(lineno=-1)
    return sentences


def read_conllu(path: str) -> list[ConlluSentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read(), source=path)
