"""Log-bilinear scoring of relation instances.

Each word contributes the outer product of its sparse binary feature
vector and its dense embedding; their sum is the sentence embedding, and a
per-label weight matrix scores it through a Frobenius inner product
followed by a softmax. The production scorer never materializes the outer
products: with s active features per word it costs O(s*n*d) per label.

Loss here is the negated label log-likelihood, so trainers minimize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import LabelSet, RelationInstance, dependency_path
from .embeddings import EmbeddingTable
from .features import FeatureConfig, FeatureVocab, extract_word_features


@dataclass
class FcmParams:
    """Per-label weight tensor over (feature, embedding-component) pairs."""
    labels: LabelSet
    T: np.ndarray  # (num_labels, num_features, dim) float64
    table: EmbeddingTable
    fine_tune: bool = False

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=np.float64)
        if self.T.ndim != 3:
            raise ValueError(f"T must have shape (labels, features, dim), got {self.T.shape}")
        if self.T.shape[0] != len(self.labels):
            raise ValueError(f"T has {self.T.shape[0]} label slices for "
                             f"{len(self.labels)} labels")
        if self.T.shape[2] != self.table.dim:
            raise ValueError(f"T dim {self.T.shape[2]} != embedding dim {self.table.dim}")

    @property
    def num_features(self) -> int:
        return int(self.T.shape[1])

    @classmethod
    def zeros(cls, labels: LabelSet, num_features: int, table: EmbeddingTable,
              fine_tune: bool = False) -> "FcmParams":
        return cls(labels, np.zeros((len(labels), num_features, table.dim)), table, fine_tune)


@dataclass
class EncodedInstance:
    """Feature indices and embedding rows of one instance, ready to score.

    ``emb_rows[i]`` is the token's row in the embedding matrix, or -1 when
    the OOV policy vector applies (captured in ``oov_vec`` at encode time).
    ``vecs`` caches the token vectors when the embeddings are static.
    """
    n: int
    feat_rows: list[np.ndarray]
    all_feats: np.ndarray   # concatenation of feat_rows
    feat_token: np.ndarray  # token index for each entry of all_feats
    emb_rows: np.ndarray
    oov_vec: np.ndarray
    word_keys: list[str | None]
    gold: int | None = None
    instance: RelationInstance | None = None
    vecs: np.ndarray | None = field(default=None, repr=False)


def encode_instance(instance: RelationInstance, config: FeatureConfig,
                    vocab: FeatureVocab, table: EmbeddingTable,
                    labels: LabelSet | None = None,
                    static: bool = True) -> EncodedInstance:
    """Extract features and resolve embeddings for one instance.

    Pass ``static=False`` while fine-tuning so token vectors are re-read
    from the (mutating) table at every scoring call.
    """
    path = frozenset(dependency_path(instance.sentence, instance.m1.head, instance.m2.head))
    n = len(instance.sentence)
    feat_rows = [extract_word_features(instance, i, config, vocab, path) for i in range(n)]
    all_feats = (np.concatenate(feat_rows) if any(r.size for r in feat_rows)
                 else np.empty(0, dtype=np.int64))
    feat_token = np.repeat(np.arange(n), [r.size for r in feat_rows])
    word_keys = [table.lookup_key(t.form) for t in instance.sentence.tokens]
    emb_rows = np.array([table.vocab[k] if k is not None else -1 for k in word_keys],
                        dtype=np.int64)
    gold = None
    if labels is not None and instance.label is not None:
        gold = labels.get(instance.label)
    enc = EncodedInstance(n=n, feat_rows=feat_rows, all_feats=all_feats,
                          feat_token=feat_token, emb_rows=emb_rows,
                          oov_vec=np.array(table.unk_vector, dtype=np.float64),
                          word_keys=word_keys, gold=gold, instance=instance)
    if static:
        enc.vecs = token_vectors(enc, table)
    return enc


def token_vectors(enc: EncodedInstance, table: EmbeddingTable) -> np.ndarray:
    """(n, dim) matrix of the token vectors backing ``enc``."""
    if enc.vecs is not None:
        return enc.vecs
    vecs = np.empty((enc.n, table.dim))
    in_vocab = enc.emb_rows >= 0
    vecs[in_vocab] = table.matrix[enc.emb_rows[in_vocab]]
    vecs[~in_vocab] = enc.oov_vec
    return vecs


def substructure_embedding(indices: Sequence[int] | np.ndarray, embedding: np.ndarray,
                           num_features: int) -> np.ndarray:
    """Outer product of a sparse binary vector with a dense one, as a dense matrix.

    Row j equals ``embedding`` when j is in ``indices`` and zero otherwise.
    """
    indices = np.asarray(indices, dtype=np.int64)
    embedding = np.asarray(embedding, dtype=np.float64)
    if indices.size and (indices.min() < 0 or indices.max() >= num_features):
        raise IndexError("feature index out of range")
    out = np.zeros((num_features, embedding.shape[0]))
    out[indices] = embedding
    return out


def sentence_embedding(instance: RelationInstance, config: FeatureConfig,
                       vocab: FeatureVocab, table: EmbeddingTable) -> np.ndarray:
    """Sum of per-word substructure embeddings (dense; for small feature spaces)."""
    enc = encode_instance(instance, config, vocab, table)
    return encoded_sentence_embedding(enc, table, len(vocab))


def encoded_sentence_embedding(enc: EncodedInstance, table: EmbeddingTable,
                               num_features: int) -> np.ndarray:
    vecs = token_vectors(enc, table)
    out = np.zeros((num_features, table.dim))
    np.add.at(out, enc.all_feats, vecs[enc.feat_token])
    return out


def fcm_scores(params: FcmParams, enc: EncodedInstance) -> np.ndarray:
    """Raw per-label scores via the sparse path; O(s*n*d) products per label."""
    if enc.all_feats.size and enc.all_feats.max() >= params.num_features:
        raise ValueError("encoded feature index exceeds parameter feature dimension")
    if enc.all_feats.size == 0:
        return np.zeros(len(params.labels))
    vecs = token_vectors(enc, params.table)
    t_rows = params.T[:, enc.all_feats, :]      # (L, m, d)
    e_rep = vecs[enc.feat_token]                # (m, d)
    return np.einsum("lmd,md->l", t_rows, e_rep)


def score_instance(params: FcmParams, instance: RelationInstance,
                   config: FeatureConfig, vocab: FeatureVocab) -> np.ndarray:
    if len(vocab) != params.num_features:
        raise ValueError(f"vocab size {len(vocab)} != parameter feature "
                         f"dimension {params.num_features}")
    return fcm_scores(params, encode_instance(instance, config, vocab, params.table))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax (max subtraction); sums to 1 within 1e-12."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


predict_proba = softmax


def log_softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max()
    return shifted - np.log(np.exp(shifted).sum())


def predict_index(scores: np.ndarray) -> int:
    """Argmax with ties broken by the lowest label index."""
    return int(np.argmax(scores))


@dataclass
class FcmGradients:
    """Sparse gradients of the negated log-likelihood.

    ``rows``/``dT_rows`` carry only the feature rows active in the
    instance; ``dE`` maps resolved embedding-vocabulary keys to d-vectors
    and is populated only when fine-tuning.
    """
    num_labels: int
    num_features: int
    dim: int
    rows: np.ndarray          # (r,) unique active feature indices
    dT_rows: np.ndarray       # (num_labels, r, dim)
    dE: dict[str, np.ndarray]

    def dense_dT(self) -> np.ndarray:
        out = np.zeros((self.num_labels, self.num_features, self.dim))
        out[:, self.rows, :] = self.dT_rows
        return out


def gradients_from_score_grad(params: FcmParams, enc: EncodedInstance,
                              g: np.ndarray) -> FcmGradients:
    """Backpropagate a per-label score gradient ``g`` into T (and embeddings).

    dT_y = g_y * sentence_embedding, carried on the active feature rows
    only; the embedding gradient routes each label's score gradient back
    through the word's active feature rows of T and is keyed by the
    resolved embedding-vocabulary word.
    """
    dim = params.table.dim
    if enc.all_feats.size:
        rows, inverse = np.unique(enc.all_feats, return_inverse=True)
        vecs = token_vectors(enc, params.table)
        e_rep = vecs[enc.feat_token]
        ex_rows = np.zeros((rows.size, dim))
        np.add.at(ex_rows, inverse, e_rep)
        dT_rows = g[:, None, None] * ex_rows[None, :, :]
    else:
        rows = np.empty(0, dtype=np.int64)
        dT_rows = np.zeros((len(params.labels), 0, dim))

    dE: dict[str, np.ndarray] = {}
    if params.fine_tune and enc.all_feats.size:
        t_rows = params.T[:, enc.all_feats, :]
        contrib = np.einsum("l,lmd->md", g, t_rows)
        per_token = np.zeros((enc.n, dim))
        np.add.at(per_token, enc.feat_token, contrib)
        for i, key in enumerate(enc.word_keys):
            if key is None or not enc.feat_rows[i].size:
                continue
            if key in dE:
                dE[key] = dE[key] + per_token[i]
            else:
                dE[key] = per_token[i].copy()
    return FcmGradients(num_labels=len(params.labels),
                        num_features=params.num_features, dim=dim,
                        rows=rows, dT_rows=dT_rows, dE=dE)


def loss_and_gradients(params: FcmParams, enc: EncodedInstance
                       ) -> tuple[float, FcmGradients]:
    """Negated log-likelihood of the gold label and its analytic gradients.

    The score gradient is P(y) - I[y = gold] (minimization sign), so
    dT_y = (P(y) - I[y = gold]) * sentence_embedding.
    """
    if enc.gold is None:
        raise ValueError("instance has no gold label known to the label set")
    logp = log_softmax(fcm_scores(params, enc))
    loss = -float(logp[enc.gold])
    g = np.exp(logp)
    g[enc.gold] -= 1.0  # d(loss)/d(scores)
    return loss, gradients_from_score_grad(params, enc, g)


def combined_scores(fcm_part: np.ndarray | None, loglin_part: np.ndarray | None
                    ) -> np.ndarray:
    """Sum of the two sub-models' raw logits (the product-of-experts combination)."""
    if fcm_part is None and loglin_part is None:
        raise ValueError("at least one sub-model score vector is required")
    if fcm_part is None:
        return np.asarray(loglin_part, dtype=np.float64)
    if loglin_part is None:
        return np.asarray(fcm_part, dtype=np.float64)
    fcm_part = np.asarray(fcm_part, dtype=np.float64)
    loglin_part = np.asarray(loglin_part, dtype=np.float64)
    if fcm_part.shape != loglin_part.shape:
        raise ValueError(f"label-set mismatch: {fcm_part.shape} vs {loglin_part.shape}")
    return fcm_part + loglin_part


def hybrid_proba(fcm_scores_vec: np.ndarray, loglin_scores_vec: np.ndarray) -> np.ndarray:
    """Renormalized product of the two models' probabilities.

    Computed as a softmax over summed logits, which equals multiplying the
    two probability vectors and renormalizing.
    """
    return softmax(combined_scores(fcm_scores_vec, loglin_scores_vec))
