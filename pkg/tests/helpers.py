"""Shared fixture builders: tiny sentences, synthetic corpora, JSONL writers."""

from __future__ import annotations

import json

import numpy as np

from fcmre.corpus import (AnnotatedSentence, EntityMention, RelationInstance, Token,
                          sentence_to_record)
from fcmre.embeddings import EmbeddingTable


def build_sentence(forms, heads, sid="s", pos=None, ne=None, deprels=None
                   ) -> AnnotatedSentence:
    """Sentence from 0-based head indices (None marks the root)."""
    n = len(forms)
    pos = pos or [""] * n
    ne = ne or [""] * n
    deprels = deprels or ["dep"] * n
    tokens = tuple(Token(form=forms[i], pos=pos[i], ne=ne[i], head=heads[i],
                         deprel=deprels[i]) for i in range(n))
    sent = AnnotatedSentence(sid=sid, tokens=tokens)
    sent.validate()
    return sent


def mention(mid, i, etype="", start=None, end=None) -> EntityMention:
    start = i if start is None else start
    end = i + 1 if end is None else end
    return EntityMention(mid=mid, start=start, end=end, head=i, etype=etype)


def instance(sent, h1, h2, label=None, t1="", t2="") -> RelationInstance:
    return RelationInstance(sent, mention("m1", h1, t1), mention("m2", h2, t2), label)


def table_from(vectors: dict[str, list[float]], unk_policy="zero") -> EmbeddingTable:
    words = list(vectors)
    matrix = np.array([vectors[w] for w in words], dtype=np.float64)
    return EmbeddingTable(words, matrix, unk_policy=unk_policy)


# --- the six-token running example (heads of "man" and "taxicab") -----------

def taxicab_instance(label="ART") -> RelationInstance:
    # "A man driving what appeared taxicab"; root "driving", "A" under "man".
    sent = build_sentence(
        ["A", "man", "driving", "what", "appeared", "taxicab"],
        [1, 2, None, 2, 2, 2], sid="taxicab")
    m1 = EntityMention("m1", 1, 2, 1, "PER")
    m2 = EntityMention("m2", 5, 6, 5, "VEH")
    return RelationInstance(sent, m1, m2, label)


# --- linearly separable 2-label corpus (20 instances) -----------------------

SEPARABLE_VECTORS = {
    "alpha": [1.0, 0.0], "beta": [0.0, 1.0],
    "entA": [0.1, 0.1], "entB": [0.1, -0.1],
}


def separable_corpus(count=20) -> tuple[list[RelationInstance], EmbeddingTable]:
    """Label decided by the trigger word between (and on the path between) heads."""
    instances = []
    for k in range(count):
        trigger = "alpha" if k % 2 == 0 else "beta"
        sent = build_sentence(["entA", trigger, "entB"], [1, None, 1],
                              sid=f"sep{k}")
        instances.append(RelationInstance(
            sent, mention("m1", 0, "ENT"), mention("m2", 2, "ENT"),
            "A" if trigger == "alpha" else "B"))
    return instances, table_from(SEPARABLE_VECTORS)


# --- path-signal corpus: label readable only from the on-path trigger -------

def path_signal_corpus(count=2000, num_labels=4, dim=8, seed=5,
                       ) -> tuple[list[RelationInstance], list[RelationInstance],
                                  EmbeddingTable]:
    """Corpus where the on-path trigger word's embedding cluster sets the label.

    Layout per sentence: [h1, nb, h2, filler, trigger] with the trigger as
    syntactic root governing both heads, so the dependency path between the
    heads runs through it while it sits outside the linear span. Heads,
    between-words and fillers are drawn label-independently, so head-only
    feature sets carry no signal.
    """
    rng = np.random.default_rng(seed)
    cluster_words = {k: [f"c{k}w{j}" for j in range(6)] for k in range(num_labels)}
    head_words = [f"ent{j}" for j in range(10)]
    noise_words = [f"n{j}" for j in range(10)]

    vectors: dict[str, list[float]] = {}
    for k, words in cluster_words.items():
        direction = np.zeros(dim)
        direction[k % dim] = 2.0
        for w in words:
            vectors[w] = list(direction + rng.normal(0.0, 0.15, size=dim))
    for w in head_words + noise_words:
        vectors[w] = list(rng.normal(0.0, 0.15, size=dim))
    table = table_from(vectors)

    instances = []
    for idx in range(count):
        k = int(rng.integers(0, num_labels))
        trigger = cluster_words[k][int(rng.integers(0, 6))]
        forms = [head_words[int(rng.integers(0, 10))],
                 noise_words[int(rng.integers(0, 10))],
                 head_words[int(rng.integers(0, 10))],
                 noise_words[int(rng.integers(0, 10))],
                 trigger]
        sent = build_sentence(forms, [4, 0, 4, 2, None], sid=f"ps{idx}")
        instances.append(RelationInstance(
            sent, mention("m1", 0, "ENT"), mention("m2", 2, "ENT"), f"R{k}"))
    split = int(count * 0.8)
    return instances[:split], instances[split:], table


# --- JSONL fixtures ----------------------------------------------------------

def write_jsonl_corpus(path, instances) -> None:
    """One sentence per instance (each fixture instance owns its sentence)."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            record = sentence_to_record(
                inst.sentence, [inst.m1, inst.m2],
                [(inst.m1.mid, inst.m2.mid, inst.label)] if inst.label else [])
            fh.write(json.dumps(record) + "\n")


def write_embeddings_text(path, table: EmbeddingTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word in table.words():
            row = table.matrix[table.vocab[word]]
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")
