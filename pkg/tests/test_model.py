"""Scoring, softmax, loss/gradients and the hybrid combination.

Derived expectations come from independent oracles: explicit-loop dense
outer products, mpmath softmax at 50-digit precision, and central finite
differences of the loss.
"""

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fcmre.corpus import LabelSet
from fcmre.embeddings import EmbeddingTable, one_hot_table
from fcmre.features import (FeatureConfig, FeatureVocab, build_vocab,
                            extract_word_features)
from fcmre.gradcheck import check_fcm_instance, random_case
from fcmre.loglinear import LogLinearParams, loglin_proba
from fcmre.model import (FcmParams, encode_instance, fcm_scores, hybrid_proba,
                         loss_and_gradients, predict_index, predict_proba,
                         score_instance, sentence_embedding,
                         substructure_embedding)

from tests.helpers import build_sentence, instance, table_from, taxicab_instance

FULL = FeatureConfig()


def dense_scores_oracle(T, feat_rows, vecs):
    """Explicit-loop Frobenius scoring: sum_y of T_y elementwise with e_x."""
    num_labels, num_features, dim = T.shape
    ex = np.zeros((num_features, dim))
    for i, rows in enumerate(feat_rows):
        for j in rows:
            ex[j] += vecs[i]
    return np.array([float(np.sum(T[y] * ex)) for y in range(num_labels)])


def mpmath_softmax(scores):
    with mpmath.workdps(50):
        exps = [mpmath.e ** mpmath.mpf(float(s)) for s in scores]
        total = sum(exps)
        return [float(e / total) for e in exps]


def encoded_random(rng, n=5, num_features=12, dim=8, num_labels=4):
    """Random encoded instance with direct control over the feature rows."""
    case = random_case(rng, n=n, dim=dim, num_labels=num_labels)
    vocab = FeatureVocab()
    for k in range(num_features):
        vocab.add(f"f{k}")
    vocab.freeze()
    enc = encode_instance(case.instance, case.config, vocab, case.table,
                          labels=case.labels)
    # overwrite the template-driven rows with random ones for coverage
    feat_rows = []
    for i in range(enc.n):
        size = int(rng.integers(0, 4))
        rows = np.sort(rng.choice(num_features, size=size, replace=False)).astype(np.int64)
        feat_rows.append(rows)
    enc.feat_rows = feat_rows
    enc.all_feats = (np.concatenate(feat_rows) if any(r.size for r in feat_rows)
                     else np.empty(0, dtype=np.int64))
    enc.feat_token = np.repeat(np.arange(enc.n), [r.size for r in feat_rows])
    enc.vecs = None
    T = rng.normal(0.0, 0.5, size=(num_labels, num_features, dim))
    params = FcmParams(case.labels, T, case.table, fine_tune=True)
    return params, enc


class TestSubstructureEmbedding:
    def test_definition_example(self):
        out = substructure_embedding([0, 2], [2.0, -1.0], 3)
        assert np.array_equal(out, [[2.0, -1.0], [0.0, 0.0], [2.0, -1.0]])

    def test_empty_indices_zero_matrix(self):
        assert np.array_equal(substructure_embedding([], [1.0, 2.0], 3),
                              np.zeros((3, 2)))

    def test_every_entry_is_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            num_features = int(rng.integers(1, 10))
            size = int(rng.integers(0, num_features + 1))
            idx = np.sort(rng.choice(num_features, size=size, replace=False))
            e = rng.normal(size=int(rng.integers(1, 6)))
            out = substructure_embedding(idx, e, num_features)
            f = np.zeros(num_features)
            f[idx] = 1.0
            for j in range(num_features):
                for k in range(e.size):
                    assert out[j, k] == f[j] * e[k]

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            substructure_embedding([3], [1.0], 3)


class TestSentenceEmbedding:
    def test_equals_sum_of_substructure_embeddings(self):
        inst = taxicab_instance()
        vocab = build_vocab([inst], FULL)
        table = table_from({w: [1.0, 2.0] for w in inst.sentence.forms})
        full = sentence_embedding(inst, FULL, vocab, table)
        parts = sum(substructure_embedding(
            extract_word_features(inst, i, FULL, vocab),
            table.lookup(inst.sentence.tokens[i].form), len(vocab))
            for i in range(len(inst.sentence)))
        assert np.allclose(full, parts, atol=0)

    def test_single_firing_token_equals_its_substructure(self):
        # only the head_emb template is on, so exactly the two heads fire;
        # restrict further by making h2's word OOV under the zero policy.
        sent = build_sentence(["left", "x", "right"], [1, None, 1])
        inst = instance(sent, 0, 2, "X")
        config = FeatureConfig(templates=("head_emb",), entity_types="none")
        vocab = build_vocab([inst], config)
        table = EmbeddingTable(["left"], np.array([[3.0, -1.0]]), unk_policy="zero")
        got = sentence_embedding(inst, config, vocab, table)
        expected = substructure_embedding(
            extract_word_features(inst, 0, config, vocab), [3.0, -1.0], len(vocab))
        assert np.array_equal(got, expected)

    def test_all_oov_zero_policy_gives_zero_matrix(self):
        inst = taxicab_instance()
        vocab = build_vocab([inst], FULL)
        table = EmbeddingTable(["unrelated"], np.array([[1.0, 1.0]]),
                               unk_policy="zero")
        assert np.array_equal(sentence_embedding(inst, FULL, vocab, table),
                              np.zeros((len(vocab), 2)))

    def test_three_token_fixture_matches_dense_sum(self):
        sent = build_sentence(["u", "v", "w"], [1, None, 1])
        inst = instance(sent, 0, 2, "X")
        vocab = build_vocab([inst], FeatureConfig(entity_types="none"))
        table = table_from({"u": [1.0, 0.0], "v": [0.5, -0.5], "w": [0.0, 2.0]})
        enc = encode_instance(inst, FeatureConfig(entity_types="none"), vocab, table)
        expected = np.zeros((len(vocab), 2))
        for i, rows in enumerate(enc.feat_rows):
            for j in rows:
                expected[j] += table.lookup(sent.tokens[i].form)
        got = sentence_embedding(inst, FeatureConfig(entity_types="none"), vocab, table)
        assert np.allclose(got, expected, atol=0)


class TestScore:
    def test_all_ones_T_single_feature(self):
        sent = build_sentence(["a", "b"], [None, 0])
        inst = instance(sent, 0, 1, "X")
        vocab = FeatureVocab()
        vocab.add("HeadEmb:h1")
        vocab.freeze()
        table = table_from({"a": [1.0, 2.0, 3.0], "b": [0.0, 0.0, 0.0]})
        labels = LabelSet(("X",))
        config = FeatureConfig(templates=("head_emb",), entity_types="none")
        params = FcmParams(labels, np.ones((1, 1, 3)), table)
        scores = score_instance(params, inst, config, vocab)
        assert scores.shape == (1,)
        assert scores[0] == pytest.approx(6.0, abs=1e-12)

    def test_zero_T_zero_scores(self):
        inst = taxicab_instance()
        vocab = build_vocab([inst], FULL)
        table = table_from({w: [1.0, -1.0] for w in inst.sentence.forms})
        params = FcmParams(LabelSet(("A", "B")), np.zeros((2, len(vocab), 2)), table)
        assert np.array_equal(score_instance(params, inst, FULL, vocab), [0.0, 0.0])

    def test_sparse_path_equals_dense_oracle_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            params, enc = encoded_random(rng)
            from fcmre.model import token_vectors
            vecs = token_vectors(enc, params.table)
            expected = dense_scores_oracle(params.T, enc.feat_rows, vecs)
            got = fcm_scores(params, enc)
            assert np.max(np.abs(got - expected)) < 1e-10

    def test_dimension_mismatch_rejected(self):
        inst = taxicab_instance()
        vocab = build_vocab([inst], FULL)
        table = table_from({w: [1.0, -1.0] for w in inst.sentence.forms})
        params = FcmParams(LabelSet(("A",)), np.zeros((1, 3, 2)), table)
        with pytest.raises(ValueError, match="feature"):
            score_instance(params, inst, FULL, vocab)


class TestSoftmax:
    def test_uniform_on_equal_scores(self):
        assert np.allclose(predict_proba(np.zeros(3)), [1 / 3] * 3, atol=1e-15)

    def test_closed_form_ln2(self):
        p = predict_proba(np.array([np.log(2.0), 0.0]))
        assert p[0] == pytest.approx(2 / 3, abs=1e-12)
        assert p[1] == pytest.approx(1 / 3, abs=1e-12)

    def test_large_scores_match_mpmath_oracle(self):
        scores = np.array([1000.0, 999.0])
        p = predict_proba(scores)
        assert np.all(np.isfinite(p))
        expected = mpmath_softmax(scores)
        assert np.max(np.abs(p - expected)) < 1e-12
        assert p[0] == pytest.approx(0.7311, abs=5e-5)

    def test_sums_to_one_within_tolerance(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            scores = rng.uniform(-1e3, 1e3, size=int(rng.integers(2, 8)))
            assert abs(predict_proba(scores).sum() - 1.0) < 1e-12

    @given(st.lists(st.floats(min_value=-500, max_value=500), min_size=2, max_size=6),
           st.floats(min_value=-100, max_value=100))
    def test_shift_invariance_of_probabilities(self, scores, shift):
        scores = np.array(scores)
        assert np.max(np.abs(predict_proba(scores) -
                             predict_proba(scores + shift))) < 1e-12

    @given(st.lists(st.integers(min_value=-2000, max_value=2000), min_size=2,
                    max_size=6),
           st.integers(min_value=-400, max_value=400))
    def test_shift_leaves_argmax_unchanged_exactly(self, quarters, shift_quarters):
        # dyadic grid keeps the addition exact, so the invariance is exact
        scores = np.array(quarters, dtype=np.float64) / 4.0
        shift = shift_quarters / 4.0
        assert predict_index(scores) == predict_index(scores + shift)

    def test_tie_breaks_to_lowest_index(self):
        assert predict_index(np.array([1.0, 5.0, 5.0])) == 1


class TestLossAndGradients:
    def test_score_gradient_matches_stated_example(self):
        # probabilities [0.2, 0.5, 0.3], gold label index 1: the ascent-form
        # gradient is [-0.2, 0.5, -0.3]; with the minimization sign we get
        # P - onehot = [0.2, -0.5, 0.3].
        p = np.array([0.2, 0.5, 0.3])
        scores = np.log(p)
        probs = predict_proba(scores)
        g = probs.copy()
        g[1] -= 1.0
        assert np.allclose(g, [0.2, -0.5, 0.3], atol=1e-12)
        assert np.allclose(-g, [-0.2, 0.5, -0.3], atol=1e-12)

    def test_zero_features_give_uniform_loss_and_zero_dT(self):
        sent = build_sentence(list("abcdefgh"), [None, 0, 0, 0, 0, 0, 0, 0])
        inst = instance(sent, 0, 2, "X")
        vocab = FeatureVocab()
        vocab.add("never-fires")
        vocab.freeze()
        table = table_from({w: [1.0] for w in "abcdefgh"})
        labels = LabelSet(("X", "Y", "Z"))
        config = FeatureConfig(templates=("on_path",), entity_types="none",
                               path_inclusive=False)
        # heads 0 and 2 are siblings under the root, so the exclusive path
        # between them holds no other token: nothing fires.
        params = FcmParams(labels, np.zeros((3, 1, 1)), table, fine_tune=True)
        enc = encode_instance(inst, config, vocab, table, labels=labels)
        assert enc.all_feats.size == 0
        loss, grads = loss_and_gradients(params, enc)
        assert loss == pytest.approx(np.log(3), abs=1e-12)
        assert np.array_equal(grads.dense_dT(), np.zeros((3, 1, 1)))
        assert grads.dE == {}

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            params, enc = encoded_random(rng)
            assert check_fcm_instance(params, enc, eps=1e-4) < 1e-5

    def test_gold_required(self):
        rng = np.random.default_rng(1)
        params, enc = encoded_random(rng)
        enc.gold = None
        with pytest.raises(ValueError, match="gold"):
            loss_and_gradients(params, enc)

    def test_dE_keys_restricted_to_instance_words(self):
        rng = np.random.default_rng(5)
        params, enc = encoded_random(rng)
        _, grads = loss_and_gradients(params, enc)
        resolved = {k for k in enc.word_keys if k is not None}
        assert set(grads.dE) <= resolved


class TestOneHotEquivalence:
    """With one-hot embeddings the model reduces to a log-linear model over
    (feature AND word) conjunctions with matched weights."""

    def build_fixture(self):
        words = ["w0", "w1", "w2", "w3", "w4"]
        table = one_hot_table(words)
        config = FeatureConfig(entity_types="none")
        fixtures = []
        heads = [(0, 2), (1, 3), (0, 4), (2, 4), (1, 2)]
        trees = [[None, 0, 1, 2, 3], [2, 2, None, 2, 2], [1, None, 1, 1, 1],
                 [None, 0, 0, 0, 0], [4, 4, 4, 4, None]]
        for k, ((h1, h2), tree) in enumerate(zip(heads, trees)):
            sent = build_sentence(words, tree, sid=f"oh{k}")
            fixtures.append(instance(sent, h1, h2, "A" if k % 2 else "B"))
        return fixtures, table, config

    def test_probabilities_match_exactly(self):
        fixtures, table, config = self.build_fixture()
        vocab = build_vocab(fixtures, config)
        rng = np.random.default_rng(8)
        labels = LabelSet(("A", "B", "C"))
        # integer weights make float addition exact regardless of order
        T = rng.integers(-3, 4, size=(3, len(vocab), table.dim)).astype(np.float64)
        fcm = FcmParams(labels, T, table)

        conj_vocab = FeatureVocab()
        for feat in vocab.strings():
            for word in table.words():
                conj_vocab.add(f"{feat}|{word}")
        conj_vocab.freeze()
        theta = np.zeros((3, len(conj_vocab)))
        for jf, feat in enumerate(vocab.strings()):
            for word, col in table.vocab.items():
                theta[:, conj_vocab.index_of(f"{feat}|{word}")] = T[:, jf, col]
        loglin = LogLinearParams(labels, theta)

        for inst in fixtures:
            enc = encode_instance(inst, config, vocab, table, labels=labels)
            indices = []
            for i, rows in enumerate(enc.feat_rows):
                word = inst.sentence.tokens[i].form
                for j in rows:
                    indices.append(conj_vocab.index_of(f"{vocab.strings()[j]}|{word}"))
            indices = np.array(sorted(indices), dtype=np.int64)
            assert len(set(indices.tolist())) == indices.size  # binary equivalence holds
            p_fcm = predict_proba(fcm_scores(fcm, enc))
            p_ll = loglin_proba(loglin, indices)
            assert np.array_equal(p_fcm, p_ll)


class TestHybrid:
    def test_uniform_partner_keeps_fcm_probabilities(self):
        rng = np.random.default_rng(2)
        fcm_part = rng.normal(size=4)
        uniform = np.zeros(4)
        assert np.max(np.abs(hybrid_proba(fcm_part, uniform) -
                             predict_proba(fcm_part))) < 1e-12

    def test_uniform_fcm_keeps_loglin_probabilities(self):
        rng = np.random.default_rng(3)
        ll_part = rng.normal(size=5)
        assert np.max(np.abs(hybrid_proba(np.zeros(5), ll_part) -
                             predict_proba(ll_part))) < 1e-12

    def test_matches_product_then_normalize_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            a = rng.uniform(-5, 5, size=6)
            b = rng.uniform(-5, 5, size=6)
            pa, pb = predict_proba(a), predict_proba(b)
            product = pa * pb
            expected = product / product.sum()
            assert np.max(np.abs(hybrid_proba(a, b) - expected)) < 1e-12
            assert abs(hybrid_proba(a, b).sum() - 1.0) < 1e-12

    def test_argmax_invariant_to_per_model_shift(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=4)
        b = rng.normal(size=4)
        base = predict_index(a + b)
        assert predict_index((a + 3.0) + (b - 7.0)) == base

    def test_label_set_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            hybrid_proba(np.zeros(3), np.zeros(4))
