"""Retrain-with-one-set-removed ablation over the feature templates."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .corpus import RelationInstance
from .embeddings import EmbeddingTable
from .evaluation import EvalReport, score_ace, score_semeval_macro
from .features import TEMPLATE_SETS, FeatureConfig
from .trainer import TrainConfig, train

ABLATION_ORDER = TEMPLATE_SETS
_DISPLAY = {"head_emb": "-HeadEmb", "context": "-Context",
            "in_between": "-InBetween", "on_path": "-OnPath"}


def _evaluate(model, dev: Sequence[RelationInstance], protocol: str,
              nil_label: str | None) -> EvalReport:
    gold = [inst.label for inst in dev]
    predicted = model.predict(dev)
    if protocol == "semeval":
        return score_semeval_macro(gold, predicted)
    return score_ace(gold, predicted, nil_label=nil_label)


def run_ablation(train_instances: Sequence[RelationInstance],
                 dev_instances: Sequence[RelationInstance],
                 table: EmbeddingTable,
                 base_config: FeatureConfig,
                 train_config: TrainConfig,
                 kind: str = "fcm",
                 protocol: str = "ace",
                 nil_label: str | None = None) -> list[tuple[str, EvalReport]]:
    """Dev reports for the full config, each template set removed, and no types.

    Every row retrains from scratch with the same seed, so a removed set
    that never fired leaves the metrics unchanged.
    """
    rows: list[tuple[str, FeatureConfig]] = [("full", base_config)]
    for template in ABLATION_ORDER:
        if template not in base_config.templates:
            continue
        remaining = tuple(t for t in base_config.templates if t != template)
        if not remaining:
            continue  # a config must keep at least one template set
        rows.append((_DISPLAY[template], replace(base_config, templates=remaining)))
    if base_config.use_entity_types:
        rows.append(("-EntityTypes", replace(base_config, entity_types="none")))

    out = []
    for name, config in rows:
        result = train(kind, train_instances, dev_instances, config=train_config,
                       feature_config=config, table=table, nil_label=nil_label)
        out.append((name, _evaluate(result.model, dev_instances, protocol, nil_label)))
    return out


def format_ablation(rows: list[tuple[str, EvalReport]]) -> str:
    lines = [f"{'config':<14}  {'P':>8}  {'R':>8}  {'F1':>8}  {'acc':>8}  {'macroF1':>8}"]
    for name, report in rows:
        macro = f"{report.macro_f1:>8.4f}" if report.macro_f1 is not None else f"{'-':>8}"
        lines.append(f"{name:<14}  {report.micro_p:>8.4f}  {report.micro_r:>8.4f}  "
                     f"{report.micro_f1:>8.4f}  {report.accuracy:>8.4f}  {macro}")
    return "\n".join(lines)
