"""Feature-rich compositional embedding models for relation extraction.

Per-word sparse binary features are combined with dense word embeddings
through outer products, summed into a sentence-level representation, and
scored per relation label by a log-bilinear softmax; a log-linear model
over instance-level features can be trained alone or multiplied in as a
product of experts.
"""

__version__ = "0.1.0"

from .corpus import (AnnotatedSentence, Corpus, CorpusFormatError, EntityMention,
                     LabelSet, RelationInstance, Token, dependency_path,
                     generate_instances, load_corpus)
from .embeddings import (EmbeddingFormatError, EmbeddingTable, load_word2vec_text,
                         one_hot_table, save_embeddings)
from .estimators import FcmClassifier, HybridClassifier, LogLinearClassifier
from .features import FeatureConfig, FeatureVocab, extract_word_features
from .model import (FcmParams, encode_instance, fcm_scores, hybrid_proba,
                    loss_and_gradients, predict_proba, sentence_embedding,
                    softmax, substructure_embedding)
from .evaluation import EvalReport, score_ace, score_semeval_macro
from .trainer import RelationModel, TrainConfig, TrainResult, train
from .archive import load_model, save_model

__all__ = [
    "AnnotatedSentence", "Corpus", "CorpusFormatError", "EntityMention",
    "EmbeddingFormatError", "EmbeddingTable", "EvalReport", "FcmClassifier",
    "FcmParams", "FeatureConfig", "FeatureVocab", "HybridClassifier", "LabelSet",
    "LogLinearClassifier", "RelationInstance", "RelationModel", "Token",
    "TrainConfig", "TrainResult", "dependency_path", "encode_instance",
    "extract_word_features", "fcm_scores", "generate_instances", "hybrid_proba",
    "load_corpus", "load_model", "load_word2vec_text", "loss_and_gradients",
    "one_hot_table", "predict_proba", "save_embeddings", "save_model",
    "score_ace", "score_semeval_macro", "sentence_embedding", "softmax",
    "substructure_embedding", "train",
]
