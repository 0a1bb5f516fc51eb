"""Single-file model archives: a zip of JSON metadata and float64 arrays.

Weight matrices round-trip exactly (binary .npy inside the zip). The
embedding table is embedded only when it was fine-tuned (it is then a
model parameter); otherwise prediction loads the original embedding file.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict

import numpy as np

from .corpus import LabelSet
from .embeddings import EmbeddingTable
from .features import FeatureConfig, FeatureVocab
from .loglinear import LogLinearParams
from .model import FcmParams
from .trainer import RelationModel, TrainConfig

FORMAT_NAME = "fcmre-model"
FORMAT_VERSION = 1


class ArchiveFormatError(ValueError):
    """Unreadable or incompatible model archive."""


def _write_array(zf: zipfile.ZipFile, name: str, arr: np.ndarray) -> None:
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr, dtype=np.float64))
    zf.writestr(name, buf.getvalue())


def _read_array(zf: zipfile.ZipFile, name: str) -> np.ndarray:
    with zf.open(name) as fh:
        return np.load(io.BytesIO(fh.read()))


def _write_vocab(zf: zipfile.ZipFile, name: str, vocab: FeatureVocab) -> None:
    lines = [f"{i}\t{s}" for i, s in enumerate(vocab.strings())]
    zf.writestr(name, "\n".join(lines) + ("\n" if lines else ""))


def _read_vocab(zf: zipfile.ZipFile, name: str) -> FeatureVocab:
    vocab = FeatureVocab()
    text = zf.read(name).decode("utf-8")
    for line in text.splitlines():
        if line:
            _, _, feat = line.partition("\t")
            vocab.add(feat)
    return vocab.freeze()


def save_model(path: str, model: RelationModel,
               train_config: TrainConfig | None = None) -> None:
    """Write ``model`` (and the effective training config) to ``path``."""
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "labels": list(model.labels.labels),
        "nil_label": model.nil_label,
        "directed": model.labels.directed,
        "feature_config": None,
        "fine_tune": bool(model.fcm.fine_tune) if model.fcm is not None else False,
        "train_config": asdict(train_config) if train_config is not None else None,
        "embeddings_included": False,
        "unk_policy": None,
        "unk_token": None,
    }
    if model.feature_config is not None:
        meta["feature_config"] = {
            "templates": list(model.feature_config.templates),
            "entity_types": model.feature_config.entity_types,
            "path_inclusive": model.feature_config.path_inclusive,
            "include_bias": model.feature_config.include_bias,
        }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        if model.fcm is not None:
            _write_vocab(zf, "fcm/vocab.txt", model.fcm_vocab)
            _write_array(zf, "fcm/T.npy", model.fcm.T)
            if model.fcm.fine_tune:
                table = model.fcm.table
                meta["embeddings_included"] = True
                meta["unk_policy"] = table.unk_policy
                meta["unk_token"] = table.unk_token
                zf.writestr("embeddings/words.txt",
                            "\n".join(table.words()) + ("\n" if len(table) else ""))
                _write_array(zf, "embeddings/matrix.npy", table.matrix)
        if model.loglin is not None:
            _write_vocab(zf, "loglin/vocab.txt", model.ll_vocab)
            _write_array(zf, "loglin/theta.npy", model.loglin.theta)
        zf.writestr("meta.json", json.dumps(meta, indent=2, sort_keys=True))


def load_model(path: str, table: EmbeddingTable | None = None) -> RelationModel:
    """Load an archive; ``table`` supplies embeddings when none are embedded."""
    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise ArchiveFormatError(f"{path}: not a readable model archive ({exc})") from None
    with zf:
        try:
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
        except KeyError:
            raise ArchiveFormatError(f"{path}: missing meta.json") from None
        if meta.get("format") != FORMAT_NAME:
            raise ArchiveFormatError(f"{path}: unknown archive format "
                                     f"{meta.get('format')!r}")
        if meta.get("version") != FORMAT_VERSION:
            raise ArchiveFormatError(f"{path}: unsupported archive version "
                                     f"{meta.get('version')!r}")
        kind = meta["kind"]
        labels = LabelSet(tuple(meta["labels"]), nil_label=meta.get("nil_label"),
                          directed=meta.get("directed", True))
        model = RelationModel(kind=kind, labels=labels,
                              nil_label=meta.get("nil_label"))
        fc = meta.get("feature_config")
        if fc is not None:
            model.feature_config = FeatureConfig(
                templates=tuple(fc["templates"]),
                entity_types=fc["entity_types"],
                path_inclusive=fc["path_inclusive"],
                include_bias=fc["include_bias"])
        if kind in ("fcm", "hybrid"):
            if meta.get("embeddings_included"):
                words = zf.read("embeddings/words.txt").decode("utf-8").splitlines()
                matrix = _read_array(zf, "embeddings/matrix.npy")
                table = EmbeddingTable(words, matrix,
                                       unk_policy=meta.get("unk_policy") or "mean",
                                       unk_token=meta.get("unk_token") or "<unk>")
            if table is None:
                raise ArchiveFormatError(
                    f"{path}: archive has no embedded embeddings; pass the "
                    "embedding table used at training time")
            model.fcm_vocab = _read_vocab(zf, "fcm/vocab.txt")
            T = _read_array(zf, "fcm/T.npy")
            model.fcm = FcmParams(labels, T, table,
                                  fine_tune=bool(meta.get("fine_tune")))
        if kind in ("loglin", "hybrid"):
            model.ll_vocab = _read_vocab(zf, "loglin/vocab.txt")
            theta = _read_array(zf, "loglin/theta.npy")
            model.loglin = LogLinearParams(labels, theta)
    return model
