"""Finite-difference verification of the analytic gradients.

Central differences with step eps; the error of a component pair (a, fd)
is |a - fd| / max(1, |a|, |fd|), i.e. relative for large gradients and
absolute near zero, the usual convention for gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedSentence, EntityMention, LabelSet, RelationInstance, Token
from .embeddings import EmbeddingTable
from .features import FeatureConfig, FeatureVocab, extract_word_features
from . import loglinear
from .model import (EncodedInstance, FcmParams, encode_instance, fcm_scores,
                    log_softmax, loss_and_gradients)


def component_error(analytic: float, numeric: float) -> float:
    denom = max(1.0, abs(analytic), abs(numeric))
    return abs(analytic - numeric) / denom


def _fcm_loss(params: FcmParams, enc: EncodedInstance) -> float:
    logp = log_softmax(fcm_scores(params, enc))
    return -float(logp[enc.gold])


def check_fcm_instance(params: FcmParams, enc: EncodedInstance,
                       eps: float = 1e-4) -> float:
    """Max component error between analytic and central-difference gradients.

    Every T component is perturbed; embedding rows are checked for every
    in-vocabulary word of the instance when fine-tuning is on.
    """
    _, grads = loss_and_gradients(params, enc)
    dT = grads.dense_dT()
    worst = 0.0
    for iy, jf, kd in np.ndindex(params.T.shape):
        orig = params.T[iy, jf, kd]
        params.T[iy, jf, kd] = orig + eps
        up = _fcm_loss(params, enc)
        params.T[iy, jf, kd] = orig - eps
        down = _fcm_loss(params, enc)
        params.T[iy, jf, kd] = orig
        worst = max(worst, component_error(dT[iy, jf, kd], (up - down) / (2 * eps)))
    if params.fine_tune:
        table = params.table
        keys = sorted({k for k in enc.word_keys if k is not None})
        for key in keys:
            row = table.vocab[key]
            analytic_vec = grads.dE.get(key, np.zeros(table.dim))
            for kd in range(table.dim):
                orig = table.matrix[row, kd]
                table.matrix[row, kd] = orig + eps
                up = _fcm_loss(params, enc)
                table.matrix[row, kd] = orig - eps
                down = _fcm_loss(params, enc)
                table.matrix[row, kd] = orig
                worst = max(worst, component_error(analytic_vec[kd],
                                                   (up - down) / (2 * eps)))
    return worst


def check_loglin_instance(params: loglinear.LogLinearParams, indices: np.ndarray,
                          gold: int, eps: float = 1e-4) -> float:
    """Max component error for the log-linear gradient (rank-one in theta)."""
    _, g = loglinear.loss_and_gradients(params, indices, gold)
    active = set(indices.tolist())
    worst = 0.0
    for iy in range(params.theta.shape[0]):
        for jf in range(params.theta.shape[1]):
            analytic = g[iy] if jf in active else 0.0
            orig = params.theta[iy, jf]
            params.theta[iy, jf] = orig + eps
            up_logp = loglinear.log_softmax(loglinear.loglin_scores(params, indices))
            params.theta[iy, jf] = orig - eps
            down_logp = loglinear.log_softmax(loglinear.loglin_scores(params, indices))
            params.theta[iy, jf] = orig
            numeric = (-float(up_logp[gold]) + float(down_logp[gold])) / (2 * eps)
            worst = max(worst, component_error(analytic, numeric))
    return worst


def random_tree_heads(rng: np.random.Generator, n: int) -> list[int | None]:
    """Random rooted tree over n tokens: token 0 is the root."""
    return [None] + [int(rng.integers(0, i)) for i in range(1, n)]


def random_sentence(rng: np.random.Generator, n: int, word_pool: list[str],
                    sid: str = "g") -> AnnotatedSentence:
    heads = random_tree_heads(rng, n)
    tokens = tuple(Token(form=word_pool[int(rng.integers(0, len(word_pool)))],
                         pos="X", ne="", head=heads[i], deprel="dep")
                   for i in range(n))
    return AnnotatedSentence(sid=sid, tokens=tokens)


@dataclass
class GradCheckCase:
    instance: RelationInstance
    table: EmbeddingTable
    config: FeatureConfig
    labels: LabelSet


def random_case(rng: np.random.Generator, n: int = 6, dim: int = 8,
                num_labels: int = 4, typed: bool = False) -> GradCheckCase:
    """Small random instance with its own embedding table and config.

    The word pool is smaller than the sentence so repeated words exercise
    the per-word accumulation of the embedding gradient. The typed preset
    keeps the feature space small (one-letter type alphabet, two template
    sets); the untyped one enables all four template sets.
    """
    n = max(n, 2)
    pool = [f"w{k}" for k in range(max(2, n - 2))]
    sentence = random_sentence(rng, n, pool)
    h1, h2 = rng.choice(n, size=2, replace=False)
    h1, h2 = int(h1), int(h2)
    etypes = ("A", "A") if typed else ("", "")
    m1 = EntityMention(mid="m1", start=h1, end=h1 + 1, head=h1, etype=etypes[0])
    m2 = EntityMention(mid="m2", start=h2, end=h2 + 1, head=h2, etype=etypes[1])
    label_names = tuple(f"L{k}" for k in range(num_labels))
    gold = label_names[int(rng.integers(0, num_labels))]
    instance = RelationInstance(sentence, m1, m2, gold)
    matrix = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(pool), dim))
    table = EmbeddingTable(pool, matrix, unk_policy="zero")
    if typed:
        config = FeatureConfig(templates=("head_emb", "on_path"), entity_types="gold")
    else:
        config = FeatureConfig(entity_types="none")
    return GradCheckCase(instance=instance, table=table, config=config,
                         labels=LabelSet(label_names))


def run_fcm_gradcheck(seed: int = 7, count: int = 100, n: int = 6, dim: int = 8,
                      num_labels: int = 4, eps: float = 1e-4,
                      fine_tune: bool = True) -> float:
    """Max error over ``count`` random instances; alternates feature presets."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c in range(count):
        case = random_case(rng, n=n, dim=dim, num_labels=num_labels,
                           typed=bool(c % 2))
        vocab = FeatureVocab()
        inst = case.instance
        for i in range(len(inst.sentence)):
            extract_word_features(inst, i, case.config, vocab)
        vocab.freeze()
        T = rng.normal(0.0, 0.4, size=(len(case.labels), len(vocab), dim))
        params = FcmParams(case.labels, T, case.table, fine_tune=fine_tune)
        enc = encode_instance(inst, case.config, vocab, case.table,
                              labels=case.labels, static=not fine_tune)
        if enc.gold is None:
            raise AssertionError("generated instance lost its gold label")
        worst = max(worst, check_fcm_instance(params, enc, eps=eps))
    return worst
