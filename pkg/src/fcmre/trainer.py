"""Per-instance stochastic-gradient training with dev-set early stopping.

Updates follow theta <- theta - lr * (grad + l2 * theta); embedding rows,
when fine-tuned, are updated from their own gradient without the L2 term
(shrinking pretrained vectors toward zero would discard their structure).
Training is a single sequential loop so a fixed seed reproduces parameters
bit for bit. The optional AdaGrad mode applies to the weight matrices;
fine-tuned embeddings keep the plain constant-rate update.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import loglinear
from .corpus import LabelSet, RelationInstance
from .embeddings import EmbeddingTable
from .evaluation import score_ace, score_semeval_macro
from .features import FeatureConfig, FeatureVocab, build_vocab
from .model import (FcmParams, combined_scores, encode_instance, fcm_scores,
                    gradients_from_score_grad, log_softmax, predict_index, softmax)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("fcm", "loglin", "hybrid")
METRICS = ("accuracy", "micro_f1", "macro_f1")

# Constant-rate SGD defaults, chosen by whether embeddings are fine-tuned.
LEARNING_RATE_FINE_TUNE = 5e-3
LEARNING_RATE_STATIC = 5e-2


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float | None = None  # None: pick by fine_tune flag
    epochs: int = 50
    l2: float = 1e-4
    fine_tune: bool = False
    seed: int = 13
    shuffle: bool = True
    early_stop_metric: str = "accuracy"
    patience: int = 5
    optimizer: str = "sgd"
    embedding_lr: float | None = None  # None: same rate as the weights

    def __post_init__(self):
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.early_stop_metric not in METRICS:
            raise ValueError(f"early_stop_metric must be one of {METRICS}")
        if self.optimizer not in ("sgd", "adagrad"):
            raise ValueError("optimizer must be 'sgd' or 'adagrad'")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return LEARNING_RATE_FINE_TUNE if self.fine_tune else LEARNING_RATE_STATIC

    @property
    def resolved_embedding_lr(self) -> float:
        return self.embedding_lr if self.embedding_lr is not None \
            else self.resolved_learning_rate


@dataclass
class RelationModel:
    """Everything needed to score instances: label set, vocabularies, weights."""
    kind: str
    labels: LabelSet
    feature_config: FeatureConfig | None = None
    fcm_vocab: FeatureVocab | None = None
    fcm: FcmParams | None = None
    ll_vocab: FeatureVocab | None = None
    loglin: loglinear.LogLinearParams | None = None
    nil_label: str | None = None

    def scores(self, instance: RelationInstance) -> np.ndarray:
        fcm_part = None
        ll_part = None
        if self.fcm is not None:
            enc = encode_instance(instance, self.feature_config, self.fcm_vocab,
                                  self.fcm.table)
            fcm_part = fcm_scores(self.fcm, enc)
        if self.loglin is not None:
            idx = loglinear.encode_features(instance, self.ll_vocab)
            ll_part = loglinear.loglin_scores(self.loglin, idx)
        return combined_scores(fcm_part, ll_part)

    def proba(self, instance: RelationInstance) -> np.ndarray:
        return softmax(self.scores(instance))

    def predict_one(self, instance: RelationInstance) -> str:
        return self.labels.labels[predict_index(self.scores(instance))]

    def predict(self, instances: Sequence[RelationInstance]) -> list[str]:
        return [self.predict_one(inst) for inst in instances]

    def predict_proba(self, instances: Sequence[RelationInstance]) -> np.ndarray:
        if not instances:
            return np.zeros((0, len(self.labels)))
        return np.vstack([self.proba(inst) for inst in instances])

    @property
    def table(self) -> EmbeddingTable | None:
        return self.fcm.table if self.fcm is not None else None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float | None
    seconds: float


@dataclass
class TrainResult:
    model: RelationModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def best_dev_metric(self) -> float | None:
        if self.best_epoch is None:
            return None
        return self.history[self.best_epoch - 1].dev_metric


def build_label_set(instances: Sequence[RelationInstance],
                    nil_label: str | None = None) -> LabelSet:
    """Labels in first-seen order; a provided nil label is placed first."""
    labels: list[str] = []
    seen: set[str] = set()
    if nil_label is not None:
        labels.append(nil_label)
        seen.add(nil_label)
    for inst in instances:
        if inst.label is not None and inst.label not in seen:
            seen.add(inst.label)
            labels.append(inst.label)
    return LabelSet(tuple(labels), nil_label=nil_label)


def evaluate_predictions(gold: Sequence[str], predicted: Sequence[str],
                         metric: str, nil_label: str | None = None) -> float:
    """Scalar dev metric for early stopping; pure."""
    if metric == "accuracy":
        if not gold:
            return 0.0
        return sum(g == p for g, p in zip(gold, predicted)) / len(gold)
    if metric == "micro_f1":
        return score_ace(gold, predicted, nil_label=nil_label).micro_f1
    if metric == "macro_f1":
        report = score_semeval_macro(gold, predicted)
        return report.macro_f1 if report.macro_f1 is not None else 0.0
    raise ValueError(f"unknown metric {metric!r}")


def evaluate_epoch(model: RelationModel, dev_instances: Sequence[RelationInstance],
                   metric: str = "accuracy", nil_label: str | None = None) -> float:
    """Dev metric of ``model`` on labeled instances; does not mutate parameters."""
    gold = [inst.label for inst in dev_instances]
    return evaluate_predictions(gold, model.predict(dev_instances), metric,
                                nil_label=nil_label)


class _AdaGrad:
    """Dense AdaGrad over named arrays; the L2 term enters the gradient."""

    def __init__(self, eps: float = 1e-8):
        self.eps = eps
        self._acc: dict[str, np.ndarray] = {}

    def update(self, name: str, arr: np.ndarray, grad: np.ndarray, lr: float) -> None:
        acc = self._acc.setdefault(name, np.zeros_like(arr))
        acc += grad * grad
        arr -= lr * grad / (np.sqrt(acc) + self.eps)


def _predict_encoded(model: RelationModel, fcm_encs, ll_indices) -> list[str]:
    labels = model.labels.labels
    count = len(fcm_encs) if fcm_encs is not None else len(ll_indices)
    out = []
    for t in range(count):
        fcm_part = fcm_scores(model.fcm, fcm_encs[t]) if fcm_encs is not None else None
        ll_part = (loglinear.loglin_scores(model.loglin, ll_indices[t])
                   if ll_indices is not None else None)
        out.append(labels[predict_index(combined_scores(fcm_part, ll_part))])
    return out


def train(kind: str,
          train_instances: Sequence[RelationInstance],
          dev_instances: Sequence[RelationInstance] | None,
          config: TrainConfig,
          feature_config: FeatureConfig | None = None,
          table: EmbeddingTable | None = None,
          labels: LabelSet | None = None,
          nil_label: str | None = None) -> TrainResult:
    """Fit a model of ``kind`` ("fcm", "loglin", "hybrid") by per-instance SGD.

    Feature vocabularies come from a first pass over the training instances
    only and are frozen before any dev instance is encoded. After every
    epoch the dev metric is evaluated; training stops once ``patience``
    consecutive epochs fail to improve it, and the returned model carries
    the best-scoring snapshot (the final parameters when no dev set is
    given). In the hybrid kind both sub-models share the score gradient but
    keep separate parameters.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {kind!r}")
    if not train_instances:
        raise ValueError("training set is empty")
    use_fcm = kind in ("fcm", "hybrid")
    use_ll = kind in ("loglin", "hybrid")
    if use_fcm:
        if table is None:
            raise ValueError(f"kind {kind!r} requires an embedding table")
        if feature_config is None:
            feature_config = FeatureConfig()
    if labels is None:
        labels = build_label_set(train_instances, nil_label=nil_label)
    for inst in train_instances:
        if inst.label is None or inst.label not in labels:
            raise ValueError(f"training instance has label {inst.label!r} "
                             "outside the label set")
    if dev_instances:
        for inst in dev_instances:
            if inst.label is None:
                raise ValueError("dev instances must carry gold labels")
        missing = sorted({inst.label for inst in dev_instances
                          if inst.label not in labels})
        if missing:
            logger.warning("dev labels absent from training data are never "
                           "predicted: %s", ", ".join(missing))

    fine_tune = config.fine_tune and use_fcm
    model = RelationModel(kind=kind, labels=labels, nil_label=nil_label)
    fcm_encs = dev_fcm_encs = None
    ll_idx = dev_ll_idx = None
    if use_fcm:
        model.feature_config = feature_config
        model.fcm_vocab = build_vocab(train_instances, feature_config)
        model.fcm = FcmParams.zeros(labels, len(model.fcm_vocab), table,
                                    fine_tune=fine_tune)
        fcm_encs = [encode_instance(inst, feature_config, model.fcm_vocab, table,
                                    labels=labels, static=not fine_tune)
                    for inst in train_instances]
        if dev_instances:
            dev_fcm_encs = [encode_instance(inst, feature_config, model.fcm_vocab,
                                            table, labels=labels, static=not fine_tune)
                            for inst in dev_instances]
    if use_ll:
        model.ll_vocab = loglinear.build_vocab(train_instances)
        model.loglin = loglinear.LogLinearParams.zeros(labels, len(model.ll_vocab))
        ll_idx = [loglinear.encode_features(inst, model.ll_vocab)
                  for inst in train_instances]
        if dev_instances:
            dev_ll_idx = [loglinear.encode_features(inst, model.ll_vocab)
                          for inst in dev_instances]

    golds = [labels.index_of(inst.label) for inst in train_instances]
    dev_gold = [inst.label for inst in dev_instances] if dev_instances else None

    lr = config.resolved_learning_rate
    emb_lr = config.resolved_embedding_lr
    l2 = config.l2
    rng = np.random.default_rng(config.seed)
    adagrad = _AdaGrad() if config.optimizer == "adagrad" else None

    best_metric = -np.inf
    best_epoch: int | None = None
    best_snapshot = None
    stale = 0
    history: list[EpochRecord] = []
    order = np.arange(len(train_instances))

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        if config.shuffle:
            order = rng.permutation(len(train_instances))
        total_loss = 0.0
        for t in order:
            gold = golds[t]
            enc = fcm_encs[t] if use_fcm else None
            idx = ll_idx[t] if use_ll else None

            fcm_part = fcm_scores(model.fcm, enc) if use_fcm else None
            ll_part = loglinear.loglin_scores(model.loglin, idx) if use_ll else None
            logp = log_softmax(combined_scores(fcm_part, ll_part))
            total_loss += -float(logp[gold])
            g = np.exp(logp)
            g[gold] -= 1.0

            # Gradients are all taken at the pre-update parameters.
            grads = gradients_from_score_grad(model.fcm, enc, g) if use_fcm else None
            if use_fcm:
                if adagrad is not None:
                    dense = grads.dense_dT()
                    if l2:
                        dense += l2 * model.fcm.T
                    adagrad.update("fcm.T", model.fcm.T, dense, lr)
                else:
                    if l2:
                        model.fcm.T *= 1.0 - lr * l2
                    if grads.rows.size:
                        model.fcm.T[:, grads.rows, :] -= lr * grads.dT_rows
            if use_ll:
                if adagrad is not None:
                    dense = np.zeros_like(model.loglin.theta)
                    if idx.size:
                        dense[:, idx] = g[:, None]
                    if l2:
                        dense += l2 * model.loglin.theta
                    adagrad.update("loglin.theta", model.loglin.theta, dense, lr)
                else:
                    if l2:
                        model.loglin.theta *= 1.0 - lr * l2
                    if idx.size:
                        model.loglin.theta[:, idx] -= lr * g[:, None]
            if fine_tune and grads is not None:
                for key, vec in grads.dE.items():
                    table.matrix[table.vocab[key]] -= emb_lr * vec

        train_loss = total_loss / len(train_instances)
        dev_metric = None
        if dev_instances:
            predicted = _predict_encoded(model, dev_fcm_encs, dev_ll_idx)
            dev_metric = evaluate_predictions(dev_gold, predicted,
                                              config.early_stop_metric,
                                              nil_label=nil_label)
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss,
                                   dev_metric=dev_metric,
                                   seconds=time.perf_counter() - started))
        logger.info("epoch %d: train_loss=%.6f dev_metric=%s", epoch, train_loss,
                    f"{dev_metric:.4f}" if dev_metric is not None else "n/a")

        if dev_metric is not None:
            if dev_metric > best_metric:
                best_metric = dev_metric
                best_epoch = epoch
                best_snapshot = _snapshot(model, table, fine_tune)
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    if best_snapshot is not None:
        _restore(model, table, fine_tune, best_snapshot)
    if fine_tune:
        table.refresh_unk_cache()
    return TrainResult(model=model, history=history,
                       best_epoch=best_epoch if dev_instances else None)


def _snapshot(model: RelationModel, table, fine_tune: bool):
    return (model.fcm.T.copy() if model.fcm is not None else None,
            model.loglin.theta.copy() if model.loglin is not None else None,
            table.matrix.copy() if fine_tune else None)


def _restore(model: RelationModel, table, fine_tune: bool, snapshot) -> None:
    fcm_T, theta, matrix = snapshot
    if fcm_T is not None:
        model.fcm.T = fcm_T
    if theta is not None:
        model.loglin.theta = theta
    if matrix is not None:
        table.matrix[...] = matrix
