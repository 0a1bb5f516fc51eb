"""Log-linear relation classifier over instance-level binary features.

Used stand-alone as the hand-crafted-feature baseline and as one factor of
the hybrid model. The template inventory is a deliberately reduced set
(head words, entity types, between/path bags, distance buckets, mention
order, short POS sequences); baseline numbers from it are "reduced
baseline" numbers, not a full classical feature system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .corpus import LabelSet, RelationInstance, dependency_path
from .features import FeatureVocab
from .model import log_softmax, softmax

DISTANCE_BUCKETS = ((0, "0"), (1, "1"), (2, "2"), (5, "3-5"))
MAX_POS_SEQ = 4


def distance_bucket(num_between: int) -> str:
    for limit, name in DISTANCE_BUCKETS:
        if num_between <= limit:
            return name
    return "6+"


def extract_instance_features(instance: RelationInstance) -> list[str]:
    """Instance-level binary feature strings; deterministic and duplicate-free."""
    sent = instance.sentence
    h1, h2 = instance.m1.head, instance.m2.head
    lo, hi = min(h1, h2), max(h1, h2)
    w1, w2 = sent.tokens[h1].form, sent.tokens[h2].form

    feats = [
        f"h1w:{w1}",
        f"h2w:{w2}",
        f"h12w:{w1}|{w2}",
        f"t1:{instance.m1.etype}",
        f"t2:{instance.m2.etype}",
        f"t12:{instance.m1.etype}|{instance.m2.etype}",
        f"dist:{distance_bucket(hi - lo - 1)}",
        "order:m1<m2" if h1 < h2 else "order:m2<m1",
    ]
    between = [sent.tokens[i] for i in range(lo + 1, hi)]
    feats.extend(f"between:{tok.form}" for tok in between)
    if len(between) <= MAX_POS_SEQ:
        feats.append("posseq:" + "-".join(tok.pos for tok in between))
    else:
        feats.append("posseq:LONG")
    path = dependency_path(sent, h1, h2)
    feats.extend(f"pathw:{sent.tokens[i].form}" for i in path[1:-1])
    for a, b in zip(path, path[1:]):
        child = a if sent.tokens[a].head == b else b
        feats.append(f"pathl:{sent.tokens[child].deprel}")
    seen: set[str] = set()
    out = []
    for f in feats:
        if f not in seen:
            seen.add(f)
            out.append(f)
    return out


@dataclass
class LogLinearParams:
    """Weight vector indexed by (label, feature)."""
    labels: LabelSet
    theta: np.ndarray  # (num_labels, num_features) float64

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 2 or self.theta.shape[0] != len(self.labels):
            raise ValueError(f"theta shape {self.theta.shape} does not match "
                             f"{len(self.labels)} labels")

    @property
    def num_features(self) -> int:
        return int(self.theta.shape[1])

    @classmethod
    def zeros(cls, labels: LabelSet, num_features: int) -> "LogLinearParams":
        return cls(labels, np.zeros((len(labels), num_features)))


def encode_features(instance: RelationInstance, vocab: FeatureVocab) -> np.ndarray:
    """Sorted unique feature indices under ``vocab`` (unknowns dropped when frozen)."""
    indices = {vocab.add(s) for s in extract_instance_features(instance)}
    indices.discard(None)
    return np.array(sorted(indices), dtype=np.int64)


def build_vocab(instances: Iterable[RelationInstance]) -> FeatureVocab:
    vocab = FeatureVocab()
    for inst in instances:
        encode_features(inst, vocab)
    return vocab.freeze()


def loglin_scores(params: LogLinearParams, indices: np.ndarray) -> np.ndarray:
    if indices.size == 0:
        return np.zeros(len(params.labels))
    return params.theta[:, indices].sum(axis=1)


def loglin_proba(params: LogLinearParams, indices: np.ndarray) -> np.ndarray:
    return softmax(loglin_scores(params, indices))


def loss_and_gradients(params: LogLinearParams, indices: np.ndarray, gold: int
                       ) -> tuple[float, np.ndarray]:
    """Negated log-likelihood and d(loss)/d(scores).

    The parameter gradient is rank-one: d(loss)/d(theta[y, k]) equals the
    returned score gradient at y for every active feature k, zero elsewhere.
    """
    if not 0 <= gold < len(params.labels):
        raise ValueError(f"gold label index {gold} out of range")
    logp = log_softmax(loglin_scores(params, indices))
    g = np.exp(logp)
    g[gold] -= 1.0
    return -float(logp[gold]), g
