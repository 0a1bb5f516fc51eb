"""Scikit-learn style estimators wrapping the trainer.

``X`` is a sequence of RelationInstance objects; labels come from the
instances themselves unless ``y`` overrides them. Hyperparameters follow
the sklearn convention (stored verbatim in ``__init__``, learned state in
trailing-underscore attributes), so ``get_params``/``set_params``,
``clone`` and metric utilities compose as usual.
"""

from __future__ import annotations

from dataclasses import replace
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import archive
from .corpus import RelationInstance
from .embeddings import EmbeddingTable, load_word2vec_text
from .features import TEMPLATE_SETS, FeatureConfig
from .trainer import TrainConfig, train


def _as_instances(X) -> list[RelationInstance]:
    instances = list(X)
    for item in instances:
        if not isinstance(item, RelationInstance):
            raise TypeError(f"expected RelationInstance inputs, got {type(item).__name__}")
    return instances


def _with_labels(instances: list[RelationInstance], y) -> list[RelationInstance]:
    if y is None:
        return instances
    y = list(y)
    if len(y) != len(instances):
        raise ValueError(f"y has {len(y)} labels for {len(instances)} instances")
    return [replace(inst, label=lab) for inst, lab in zip(instances, y)]


class _RelationClassifier(BaseEstimator, ClassifierMixin):
    """Shared fit/predict plumbing; subclasses fix the model kind."""

    _kind = ""

    def __init__(self, embeddings=None, templates=TEMPLATE_SETS, entity_types="gold",
                 path_inclusive=True, include_bias=False, fine_tune=False,
                 learning_rate=None, embedding_lr=None, l2=1e-4, epochs=50,
                 patience=5, seed=13, shuffle=True, optimizer="sgd",
                 early_stop_metric="accuracy", nil_label=None, unk_policy="mean"):
        self.embeddings = embeddings
        self.templates = templates
        self.entity_types = entity_types
        self.path_inclusive = path_inclusive
        self.include_bias = include_bias
        self.fine_tune = fine_tune
        self.learning_rate = learning_rate
        self.embedding_lr = embedding_lr
        self.l2 = l2
        self.epochs = epochs
        self.patience = patience
        self.seed = seed
        self.shuffle = shuffle
        self.optimizer = optimizer
        self.early_stop_metric = early_stop_metric
        self.nil_label = nil_label
        self.unk_policy = unk_policy

    def _resolve_table(self) -> EmbeddingTable | None:
        if self._kind == "loglin":
            return None
        if isinstance(self.embeddings, EmbeddingTable):
            if self.fine_tune:
                # Fine-tuning mutates rows; keep the caller's table intact.
                return EmbeddingTable(self.embeddings.words(),
                                      self.embeddings.matrix.copy(),
                                      unk_policy=self.embeddings.unk_policy,
                                      unk_token=self.embeddings.unk_token)
            return self.embeddings
        if isinstance(self.embeddings, str):
            return load_word2vec_text(self.embeddings, unk_policy=self.unk_policy)
        raise ValueError(f"{type(self).__name__} requires 'embeddings' "
                         "(an EmbeddingTable or a word2vec text path)")

    def _feature_config(self) -> FeatureConfig | None:
        if self._kind == "loglin":
            return None
        templates = self.templates
        if isinstance(templates, str):
            templates = FeatureConfig.parse_templates(templates)
        return FeatureConfig(templates=tuple(templates),
                             entity_types=self.entity_types,
                             path_inclusive=self.path_inclusive,
                             include_bias=self.include_bias)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           l2=self.l2, fine_tune=self.fine_tune, seed=self.seed,
                           shuffle=self.shuffle,
                           early_stop_metric=self.early_stop_metric,
                           patience=self.patience, optimizer=self.optimizer,
                           embedding_lr=self.embedding_lr)

    def fit(self, X, y=None, dev=None, dev_y=None):
        """Fit on labeled instances; ``dev`` drives early stopping when given."""
        instances = _with_labels(_as_instances(X), y)
        dev_instances = _with_labels(_as_instances(dev), dev_y) if dev is not None else None
        result = train(self._kind, instances, dev_instances,
                       config=self._train_config(),
                       feature_config=self._feature_config(),
                       table=self._resolve_table(),
                       nil_label=self.nil_label)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.classes_ = np.array(result.model.labels.labels, dtype=object)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError(f"{type(self).__name__} is not fitted")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return np.array(self.model_.predict(_as_instances(X)), dtype=object)

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return self.model_.predict_proba(_as_instances(X))

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        instances = _as_instances(X)
        if not instances:
            return np.zeros((0, len(self.classes_)))
        return np.vstack([self.model_.scores(inst) for inst in instances])

    def save(self, path: str) -> None:
        """Persist the fitted model as a single-file archive."""
        self._check_fitted()
        archive.save_model(path, self.model_, train_config=self._train_config())


class FcmClassifier(_RelationClassifier):
    """Compositional-embedding relation classifier (per-word features x embeddings)."""
    _kind = "fcm"


class LogLinearClassifier(_RelationClassifier):
    """Multinomial logistic regression over instance-level binary features."""
    _kind = "loglin"

    def __init__(self, learning_rate=None, l2=1e-4, epochs=50, patience=5, seed=13,
                 shuffle=True, optimizer="sgd", early_stop_metric="accuracy",
                 nil_label=None):
        super().__init__(learning_rate=learning_rate, l2=l2, epochs=epochs,
                         patience=patience, seed=seed, shuffle=shuffle,
                         optimizer=optimizer, early_stop_metric=early_stop_metric,
                         nil_label=nil_label)


class HybridClassifier(_RelationClassifier):
    """Product-of-experts combination trained jointly with separate parameters."""
    _kind = "hybrid"
