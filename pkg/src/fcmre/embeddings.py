"""Dense word embedding storage with word2vec-text I/O and OOV policies."""

from __future__ import annotations

import gzip
import logging
from typing import IO, Iterable

import numpy as np

logger = logging.getLogger(__name__)

UNK_POLICIES = ("zero", "mean", "unk")


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file cannot be parsed."""


def _open_text(path: str, mode: str) -> IO[str]:
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


class EmbeddingTable:
    """Immutable-by-convention word -> dense vector map.

    ``unk_policy`` controls lookups of words absent from the vocabulary
    (after a lowercase retry):

    * ``"zero"``: the zero vector.
    * ``"mean"``: the arithmetic mean of all rows (cached).
    * ``"unk"``: the row of ``unk_token``, which must be in the vocabulary.

    The matrix is held as float64. During fine-tuning the trainer mutates
    rows in place; call :meth:`refresh_unk_cache` afterwards so the cached
    mean reflects the updated rows.
    """

    def __init__(self, words: Iterable[str], matrix: np.ndarray,
                 unk_policy: str = "mean", unk_token: str = "<unk>"):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        if unk_policy not in UNK_POLICIES:
            raise ValueError(f"unk_policy must be one of {UNK_POLICIES}, got {unk_policy!r}")
        self.vocab: dict[str, int] = {}
        for row, word in enumerate(words):
            if word in self.vocab:
                raise ValueError(f"duplicate word {word!r} in embedding vocabulary")
            self.vocab[word] = row
        if len(self.vocab) != matrix.shape[0]:
            raise ValueError(
                f"vocabulary size {len(self.vocab)} does not match matrix rows {matrix.shape[0]}")
        self.matrix = matrix
        self.unk_policy = unk_policy
        self.unk_token = unk_token
        if unk_policy == "unk" and unk_token not in self.vocab:
            raise ValueError(f"unk_policy 'unk' requires {unk_token!r} in the vocabulary")
        self._unk_vector = self._compute_unk_vector()

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    def _compute_unk_vector(self) -> np.ndarray:
        if self.unk_policy == "zero":
            return np.zeros(self.dim)
        if self.unk_policy == "unk":
            return self.matrix[self.vocab[self.unk_token]]
        if len(self.vocab) == 0:
            return np.zeros(self.dim)
        return self.matrix.mean(axis=0)

    def refresh_unk_cache(self) -> None:
        """Recompute the cached OOV vector after in-place matrix mutation."""
        self._unk_vector = self._compute_unk_vector()

    @property
    def unk_vector(self) -> np.ndarray:
        return self._unk_vector

    def lookup_key(self, word: str) -> str | None:
        """Resolve ``word`` to the vocabulary key actually used, or None if OOV.

        Exact match wins; otherwise the lowercased form is tried.
        """
        if word in self.vocab:
            return word
        lowered = word.lower()
        if lowered in self.vocab:
            return lowered
        return None

    def lookup_row(self, word: str) -> int:
        """Row index serving ``word``, or -1 when the OOV policy vector applies."""
        key = self.lookup_key(word)
        return self.vocab[key] if key is not None else -1

    def lookup(self, word: str) -> np.ndarray:
        """Vector for ``word``; total and deterministic (OOV falls back to policy)."""
        row = self.lookup_row(word)
        if row < 0:
            return self._unk_vector
        return self.matrix[row]

    def words(self) -> list[str]:
        """Vocabulary in row order."""
        out = [""] * len(self.vocab)
        for word, row in self.vocab.items():
            out[row] = word
        return out

    def save(self, path: str) -> None:
        save_embeddings(self, path)


def load_word2vec_text(path: str, unk_policy: str = "mean",
                       unk_token: str = "<unk>", normalize: bool = False) -> EmbeddingTable:
    """Load a word2vec text file (optionally gzipped, by ``.gz`` extension).

    An optional first line ``"<count> <dim>"`` is treated as a header;
    otherwise the dimension is inferred from the first vector. Duplicate
    words keep their first occurrence (a warning is logged). Binary
    word2vec files are not supported.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = None
    with _open_text(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    declared_count, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    if dim <= 0:
                        raise EmbeddingFormatError(
                            f"{path}: header declares non-positive dimension {dim}")
                    del declared_count  # informational only; actual count is what parses
                    continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingFormatError(f"{path}: line {lineno} has no vector components")
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}: line {lineno} has {len(values)} components, expected {dim}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}: line {lineno}: {exc}") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}: line {lineno} contains a non-finite value")
            if word in seen:
                logger.warning("duplicate word %r at line %d ignored (first occurrence kept)",
                               word, lineno)
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if dim is None:
        raise EmbeddingFormatError(f"{path}: empty embedding file")
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    if normalize and len(rows):
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        matrix = matrix / norms
    return EmbeddingTable(words, matrix, unk_policy=unk_policy, unk_token=unk_token)


def save_embeddings(table: EmbeddingTable, path: str) -> None:
    """Write ``table`` in word2vec text format (header line, 6 decimal places).

    Round-trips with :func:`load_word2vec_text` to within 1e-6 per component.
    """
    with _open_text(path, "w") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word in table.words():
            row = table.matrix[table.vocab[word]]
            fh.write(word + " " + " ".join(f"{v:.6f}" for v in row) + "\n")


def one_hot_table(words: Iterable[str], unk_policy: str = "zero") -> EmbeddingTable:
    """Table whose vectors are one-hot indicators (dimension = vocabulary size)."""
    words = list(words)
    return EmbeddingTable(words, np.eye(len(words)), unk_policy=unk_policy)
