"""Scoring protocols for relation extraction and classification.

Two conventions are implemented: micro-averaged P/R/F1 that excludes a
designated no-relation label from both prediction and gold sides
(ACE-style extraction), and macro-averaged F1 per relation type with the
two directions of a type pooled but direction required for credit
(SemEval-style classification, "Other" excluded from the average).

Undefined ratios (0/0) are reported as 0, matching common relation
extraction scorers.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

_DIRECTED_RE = re.compile(r"^(?P<rtype>.+)\((?P<dir>e1,e2|e2,e1|m1,m2|m2,m1)\)$")


def split_direction(label: str) -> tuple[str, str | None]:
    """Split ``"Type(e1,e2)"`` into (type, direction); undirected -> (label, None)."""
    m = _DIRECTED_RE.match(label)
    if m:
        return m.group("rtype"), m.group("dir")
    return label, None


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class GroupScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[2]


@dataclass
class EvalReport:
    protocol: str
    n: int
    accuracy: float
    micro: GroupScore
    macro_f1: float | None
    per_label: dict[str, GroupScore]
    confusion: Counter = field(default_factory=Counter)  # (gold, pred) -> count

    @property
    def micro_p(self) -> float:
        return self.micro.precision

    @property
    def micro_r(self) -> float:
        return self.micro.recall

    @property
    def micro_f1(self) -> float:
        return self.micro.f1

    def metric(self, name: str) -> float:
        name = name.lower()
        if name == "accuracy":
            return self.accuracy
        if name in ("micro_f1", "microf1"):
            return self.micro_f1
        if name in ("macro_f1", "macrof1"):
            if self.macro_f1 is None:
                raise ValueError("report carries no macro-F1")
            return self.macro_f1
        raise ValueError(f"unknown metric {name!r}")

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "accuracy": self.accuracy,
            "micro": {"precision": self.micro_p, "recall": self.micro_r,
                      "f1": self.micro_f1, "tp": self.micro.tp,
                      "fp": self.micro.fp, "fn": self.micro.fn},
            "macro_f1": self.macro_f1,
            "per_label": {lab: {"precision": s.precision, "recall": s.recall,
                                "f1": s.f1, "tp": s.tp, "fp": s.fp, "fn": s.fn}
                          for lab, s in sorted(self.per_label.items())},
            "confusion": [{"gold": g, "pred": p, "count": c}
                          for (g, p), c in sorted(self.confusion.items())],
        }


def _check_aligned(gold: Sequence[str], predicted: Sequence[str]) -> None:
    if len(gold) != len(predicted):
        raise ValueError(f"gold has {len(gold)} items, predictions {len(predicted)}")


def score_ace(gold: Sequence[str], predicted: Sequence[str],
              nil_label: str | None = None,
              direction_sensitive: bool = True) -> EvalReport:
    """Micro-averaged extraction scores with ``nil_label`` excluded from both sides.

    A prediction is correct only on exact label match (type and direction,
    unless ``direction_sensitive`` is False, a diagnostic mode that
    compares types only).
    """
    _check_aligned(gold, predicted)

    def canon(label: str) -> str:
        return label if direction_sensitive else split_direction(label)[0]

    confusion: Counter = Counter()
    per_label: dict[str, GroupScore] = {}
    micro = GroupScore()
    correct = 0
    for g, p in zip(gold, predicted):
        confusion[(g, p)] += 1
        g_c, p_c = canon(g), canon(p)
        hit = g_c == p_c
        correct += hit
        if g != nil_label:
            score = per_label.setdefault(g_c, GroupScore())
            if hit:
                score.tp += 1
                micro.tp += 1
            else:
                score.fn += 1
                micro.fn += 1
        if p != nil_label and not hit:
            per_label.setdefault(p_c, GroupScore()).fp += 1
            micro.fp += 1
    n = len(gold)
    return EvalReport(protocol="ace", n=n, accuracy=correct / n if n else 0.0,
                      micro=micro, macro_f1=None, per_label=per_label,
                      confusion=confusion)


def score_semeval_macro(gold: Sequence[str], predicted: Sequence[str],
                        other_label: str = "Other",
                        types: Sequence[str] | None = None) -> EvalReport:
    """Macro-F1 over relation types with the two directions of a type pooled.

    Direction must match for a true positive; per-type counts merge both
    directions; the macro average runs over ``types`` when given, else
    over the types observed in gold or predictions, always excluding
    ``other_label``.
    """
    _check_aligned(gold, predicted)
    confusion: Counter = Counter()
    per_type: dict[str, GroupScore] = {t: GroupScore() for t in (types or [])}
    correct = 0
    micro = GroupScore()
    for g, p in zip(gold, predicted):
        confusion[(g, p)] += 1
        g_type, _ = split_direction(g)
        p_type, _ = split_direction(p)
        hit = g == p
        correct += hit
        if g_type != other_label:
            score = per_type.setdefault(g_type, GroupScore())
            if hit:
                score.tp += 1
                micro.tp += 1
            else:
                score.fn += 1
                micro.fn += 1
        if p_type != other_label and not hit:
            per_type.setdefault(p_type, GroupScore()).fp += 1
            micro.fp += 1
    scored_types = sorted(per_type)
    macro = (sum(per_type[t].f1 for t in scored_types) / len(scored_types)
             if scored_types else 0.0)
    n = len(gold)
    return EvalReport(protocol="semeval", n=n, accuracy=correct / n if n else 0.0,
                      micro=micro, macro_f1=macro, per_label=per_type,
                      confusion=confusion)


def score_protocol(protocol: str, gold: Sequence[str], predicted: Sequence[str],
                   nil_label: str | None = None, other_label: str = "Other") -> EvalReport:
    if protocol == "ace":
        return score_ace(gold, predicted, nil_label=nil_label)
    if protocol == "semeval":
        return score_semeval_macro(gold, predicted, other_label=other_label)
    raise ValueError(f"unknown evaluation protocol {protocol!r}")


def format_report(report: EvalReport) -> str:
    """Aligned-column text rendering of a report."""
    lines = [f"protocol: {report.protocol}   instances: {report.n}   "
             f"accuracy: {report.accuracy:.4f}"]
    width = max([len(lab) for lab in report.per_label] + [10])
    header = f"{'label':<{width}}  {'P':>8}  {'R':>8}  {'F1':>8}  {'TP':>5}  {'FP':>5}  {'FN':>5}"
    lines.append(header)
    lines.append("-" * len(header))
    for lab in sorted(report.per_label):
        s = report.per_label[lab]
        lines.append(f"{lab:<{width}}  {s.precision:>8.4f}  {s.recall:>8.4f}  "
                     f"{s.f1:>8.4f}  {s.tp:>5}  {s.fp:>5}  {s.fn:>5}")
    lines.append("-" * len(header))
    lines.append(f"{'micro':<{width}}  {report.micro_p:>8.4f}  {report.micro_r:>8.4f}  "
                 f"{report.micro_f1:>8.4f}  {report.micro.tp:>5}  "
                 f"{report.micro.fp:>5}  {report.micro.fn:>5}")
    if report.macro_f1 is not None:
        lines.append(f"macro-F1: {report.macro_f1:.4f}")
    return "\n".join(lines)


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
