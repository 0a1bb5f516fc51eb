"""Embedding table loading, OOV policies and text round-trips."""

import gzip

import numpy as np
import pytest

from fcmre.embeddings import (EmbeddingFormatError, EmbeddingTable,
                              load_word2vec_text, one_hot_table, save_embeddings)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadWord2vecText:
    def test_header_file(self, tmp_path):
        path = write(tmp_path / "emb.txt", "2 3\na 1 0 0\nb 0 1 0\n")
        table = load_word2vec_text(path)
        assert table.dim == 3
        assert len(table) == 2
        assert np.array_equal(table.lookup("a"), [1.0, 0.0, 0.0])

    def test_headerless_dim_inferred(self, tmp_path):
        path = write(tmp_path / "emb.txt", "x 0.5 0.5\n")
        table = load_word2vec_text(path)
        assert table.dim == 2
        assert len(table) == 1

    def test_inconsistent_length_names_line(self, tmp_path):
        lines = ["3 4", "a 1 2 3 4", "b 1 2 3 4", "c 1 2 3"]
        path = write(tmp_path / "emb.txt", "\n".join(lines) + "\n")
        with pytest.raises(EmbeddingFormatError, match="line 4"):
            load_word2vec_text(path)

    def test_empty_file(self, tmp_path):
        path = write(tmp_path / "emb.txt", "")
        with pytest.raises(EmbeddingFormatError, match="empty"):
            load_word2vec_text(path)

    def test_non_finite_value(self, tmp_path):
        path = write(tmp_path / "emb.txt", "a 1 nan\n")
        with pytest.raises(EmbeddingFormatError, match="non-finite"):
            load_word2vec_text(path)

    def test_non_numeric_value(self, tmp_path):
        path = write(tmp_path / "emb.txt", "a 1 oops\n")
        with pytest.raises(EmbeddingFormatError, match="line 1"):
            load_word2vec_text(path)

    def test_duplicate_keeps_first_and_warns(self, tmp_path, caplog):
        path = write(tmp_path / "emb.txt", "a 1 0\na 9 9\n")
        with caplog.at_level("WARNING"):
            table = load_word2vec_text(path)
        assert np.array_equal(table.lookup("a"), [1.0, 0.0])
        assert any("duplicate" in rec.message for rec in caplog.records)

    def test_gzip_by_extension(self, tmp_path):
        path = tmp_path / "emb.txt.gz"
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write("1 2\nz 3 4\n")
        table = load_word2vec_text(str(path))
        assert np.array_equal(table.lookup("z"), [3.0, 4.0])

    def test_normalize_flag(self, tmp_path):
        path = write(tmp_path / "emb.txt", "a 3 4\n")
        table = load_word2vec_text(path, normalize=True)
        assert np.allclose(table.lookup("a"), [0.6, 0.8])


class TestLookup:
    def test_exact_match(self, tmp_path):
        path = write(tmp_path / "emb.txt", "2 3\na 1 0 0\nb 0 1 0\n")
        table = load_word2vec_text(path)
        assert np.array_equal(table.lookup("a"), [1.0, 0.0, 0.0])

    def test_lowercase_fallback(self):
        table = EmbeddingTable(["a"], np.array([[1.0, 0.0, 0.0]]))
        assert np.array_equal(table.lookup("A"), [1.0, 0.0, 0.0])
        assert table.lookup_key("A") == "a"

    def test_exact_beats_lowercase(self):
        table = EmbeddingTable(["A", "a"], np.array([[1.0], [2.0]]))
        assert table.lookup("A")[0] == 1.0

    def test_zero_policy(self):
        table = EmbeddingTable(["a"], np.array([[1.0, 2.0, 3.0]]), unk_policy="zero")
        assert np.array_equal(table.lookup("zzz"), [0.0, 0.0, 0.0])
        assert table.lookup_key("zzz") is None
        assert table.lookup_row("zzz") == -1

    def test_mean_policy_equals_column_means(self):
        rng = np.random.default_rng(0)
        matrix = rng.normal(size=(7, 5))
        table = EmbeddingTable([f"w{i}" for i in range(7)], matrix, unk_policy="mean")
        assert np.max(np.abs(table.lookup("oov") - matrix.mean(axis=0))) <= 1e-12

    def test_dedicated_unk_policy(self):
        table = EmbeddingTable(["<unk>", "a"], np.array([[9.0], [1.0]]),
                               unk_policy="unk")
        assert table.lookup("missing")[0] == 9.0

    def test_dedicated_unk_requires_token(self):
        with pytest.raises(ValueError, match="<unk>"):
            EmbeddingTable(["a"], np.array([[1.0]]), unk_policy="unk")

    def test_lookup_is_deterministic(self):
        table = EmbeddingTable(["a"], np.array([[1.0, 2.0]]), unk_policy="mean")
        first = table.lookup("nope").copy()
        for _ in range(5):
            assert np.array_equal(table.lookup("nope"), first)


class TestConstruction:
    def test_duplicate_words_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddingTable(["a", "a"], np.zeros((2, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            EmbeddingTable(["a"], np.array([[np.inf]]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match"):
            EmbeddingTable(["a", "b"], np.zeros((3, 2)))

    def test_one_hot_table(self):
        table = one_hot_table(["x", "y", "z"])
        assert table.dim == 3
        assert np.array_equal(table.lookup("y"), [0.0, 1.0, 0.0])


class TestSaveRoundTrip:
    def test_simple_round_trip(self, tmp_path):
        table = EmbeddingTable(["a", "b"], np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
        out = tmp_path / "out.txt"
        save_embeddings(table, str(out))
        back = load_word2vec_text(str(out))
        assert back.vocab == table.vocab
        assert np.max(np.abs(back.matrix - table.matrix)) < 1e-6

    def test_empty_vocab_round_trip(self, tmp_path):
        table = EmbeddingTable([], np.zeros((0, 4)))
        out = tmp_path / "out.txt"
        save_embeddings(table, str(out))
        assert out.read_text().splitlines()[0] == "0 4"
        back = load_word2vec_text(str(out))
        assert len(back) == 0
        assert back.dim == 4

    def test_thousand_random_vectors_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        matrix = rng.uniform(-1.0, 1.0, size=(1000, 16))
        table = EmbeddingTable([f"w{i}" for i in range(1000)], matrix)
        out = tmp_path / "big.txt"
        save_embeddings(table, str(out))
        back = load_word2vec_text(str(out))
        assert back.vocab == table.vocab
        assert np.max(np.abs(back.matrix - table.matrix)) < 1e-6

    def test_large_magnitudes_round_trip(self, tmp_path):
        table = EmbeddingTable(["big"], np.array([[123.4567891, -98.7654329]]))
        out = tmp_path / "mag.txt"
        save_embeddings(table, str(out))
        back = load_word2vec_text(str(out))
        assert np.max(np.abs(back.matrix - table.matrix)) < 1e-6

    def test_unwritable_path(self, tmp_path):
        table = EmbeddingTable(["a"], np.array([[1.0]]))
        with pytest.raises(OSError):
            save_embeddings(table, str(tmp_path / "no" / "such" / "dir.txt"))


class TestRefreshUnkCache:
    def test_mean_tracks_mutation_after_refresh(self):
        table = EmbeddingTable(["a", "b"], np.array([[1.0], [3.0]]), unk_policy="mean")
        assert table.unk_vector[0] == 2.0
        table.matrix[0, 0] = 5.0
        table.refresh_unk_cache()
        assert table.unk_vector[0] == 4.0
