"""Per-word sparse binary feature templates and the frozen feature vocabulary.

Templates fire relative to the two mention heads h1, h2 of an instance:

* ``head_emb``: word is h1 (or h2), crossed with the entity-type set.
* ``context``: word is immediately left/right of h1 or h2 (no type cross).
* ``in_between``: word lies strictly between the two heads in token order,
  crossed with the entity-type set.
* ``on_path``: word lies on the dependency path between the heads
  (endpoints included by default), crossed with the entity-type set.

The entity-type cross is {bare, t1, t2, t1+t2}; the ordered pair member is
direction-sensitive. Feature strings stay human-readable so ablations can
be inspected by eye.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import RelationInstance, dependency_path

TEMPLATE_SETS = ("head_emb", "context", "in_between", "on_path")
TYPE_SOURCES = ("gold", "ne", "supersense", "none")  # plus "cluster<k>"

_CLUSTER_RE = re.compile(r"^cluster(\d+)$")


def _check_type_source(source: str) -> None:
    if source in TYPE_SOURCES or _CLUSTER_RE.match(source):
        return
    raise ValueError(f"unknown entity-type source {source!r} "
                     f"(expected one of {TYPE_SOURCES} or 'cluster<k>')")


@dataclass(frozen=True)
class FeatureConfig:
    """Which template sets fire and where entity types come from."""
    templates: tuple[str, ...] = TEMPLATE_SETS
    entity_types: str = "gold"
    path_inclusive: bool = True
    include_bias: bool = False

    def __post_init__(self):
        if not self.templates:
            raise ValueError("at least one template set must be enabled")
        for t in self.templates:
            if t not in TEMPLATE_SETS:
                raise ValueError(f"unknown template set {t!r}")
        _check_type_source(self.entity_types)

    @property
    def use_entity_types(self) -> bool:
        return self.entity_types != "none"

    @staticmethod
    def parse_templates(text: str) -> tuple[str, ...]:
        """Parse a comma-separated template list, e.g. ``"heademb,onpath"``."""
        alias = {"heademb": "head_emb", "context": "context",
                 "inbetween": "in_between", "onpath": "on_path"}
        out = []
        for raw in text.split(","):
            key = raw.strip().lower().replace("_", "").replace("-", "")
            if key not in alias:
                raise ValueError(f"unknown template name {raw.strip()!r}")
            out.append(alias[key])
        return tuple(out)


class FeatureVocab:
    """Bijective feature-string -> index map; frozen vocabs drop unknowns."""

    def __init__(self):
        self._index: dict[str, int] = {}
        self.frozen = False

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, feature: str) -> bool:
        return feature in self._index

    def index_of(self, feature: str) -> int | None:
        return self._index.get(feature)

    def add(self, feature: str) -> int | None:
        """Index for ``feature``, growing the map unless frozen (then None for unknowns)."""
        idx = self._index.get(feature)
        if idx is None and not self.frozen:
            idx = len(self._index)
            self._index[feature] = idx
        return idx

    def freeze(self) -> "FeatureVocab":
        """Reject further growth; freezing twice is a no-op."""
        self.frozen = True
        return self

    def strings(self) -> list[str]:
        out = [""] * len(self._index)
        for feat, idx in self._index.items():
            out[idx] = feat
        return out

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for idx, feat in enumerate(self.strings()):
                fh.write(f"{idx}\t{feat}\n")

    @classmethod
    def load(cls, path: str, frozen: bool = True) -> "FeatureVocab":
        vocab = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.rstrip("\n")
                if not line:
                    continue
                idx_str, _, feat = line.partition("\t")
                if int(idx_str) != lineno:
                    raise ValueError(f"{path}: non-contiguous index at line {lineno + 1}")
                vocab._index[feat] = lineno
        if frozen:
            vocab.freeze()
        return vocab


def resolve_entity_type(instance: RelationInstance, mention, source: str) -> str:
    """Entity-type string for one mention under the configured source."""
    if source == "gold":
        return mention.etype
    if source in ("ne", "supersense"):
        return instance.sentence.tokens[mention.head].ne
    m = _CLUSTER_RE.match(source)
    if m:
        return instance.sentence.tokens[mention.head].ne[:int(m.group(1))]
    return ""


def _typed(base: str, t1: str, t2: str, use_types: bool) -> list[str]:
    if not use_types:
        return [base]
    return [base, f"{base}&t1={t1}", f"{base}&t2={t2}", f"{base}&t12={t1}+{t2}"]


def word_feature_strings(instance: RelationInstance, i: int, config: FeatureConfig,
                         path: Sequence[int] | None = None) -> list[str]:
    """Feature strings firing for token ``i`` of ``instance``; deterministic.

    ``path`` is the precomputed dependency path between the two mention
    heads; it is computed on demand when omitted.
    """
    h1, h2 = instance.m1.head, instance.m2.head
    use_types = config.use_entity_types
    t1 = t2 = ""
    if use_types:
        t1 = resolve_entity_type(instance, instance.m1, config.entity_types)
        t2 = resolve_entity_type(instance, instance.m2, config.entity_types)

    out: list[str] = []
    if config.include_bias:
        out.append("Bias")
    if "head_emb" in config.templates:
        if i == h1:
            out.extend(_typed("HeadEmb:h1", t1, t2, use_types))
        if i == h2:
            out.extend(_typed("HeadEmb:h2", t1, t2, use_types))
    if "context" in config.templates:
        if i == h1 - 1:
            out.append("Context:h1-1")
        if i == h1 + 1:
            out.append("Context:h1+1")
        if i == h2 - 1:
            out.append("Context:h2-1")
        if i == h2 + 1:
            out.append("Context:h2+1")
    if "in_between" in config.templates and min(h1, h2) < i < max(h1, h2):
        out.extend(_typed("InBetween", t1, t2, use_types))
    if "on_path" in config.templates:
        if path is None:
            path = dependency_path(instance.sentence, h1, h2)
        on_path = i in path if config.path_inclusive else (i in path and i not in (h1, h2))
        if on_path:
            out.extend(_typed("OnPath", t1, t2, use_types))
    return out


def extract_word_features(instance: RelationInstance, i: int, config: FeatureConfig,
                          vocab: FeatureVocab,
                          path: Sequence[int] | None = None) -> np.ndarray:
    """Sorted unique feature indices for token ``i`` under ``vocab``.

    Unknown strings grow an unfrozen vocab and are dropped by a frozen one.
    """
    indices = {vocab.add(s) for s in word_feature_strings(instance, i, config, path)}
    indices.discard(None)
    return np.array(sorted(indices), dtype=np.int64)


def build_vocab(instances: Iterable[RelationInstance],
                config: FeatureConfig) -> FeatureVocab:
    """One extraction pass over training instances; returns the frozen vocab."""
    vocab = FeatureVocab()
    for inst in instances:
        path = dependency_path(inst.sentence, inst.m1.head, inst.m2.head)
        for i in range(len(inst.sentence)):
            extract_word_features(inst, i, config, vocab, path)
    return vocab.freeze()
