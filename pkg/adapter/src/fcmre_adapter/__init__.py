"""Converters from external corpus formats into the engine's JSONL schema."""

__version__ = "0.1.0"

from .conllu import ConlluFormatError, ConlluSentence, ConlluToken, read_conllu
from .convert import AdapterError, convert_conllu, convert_semeval
from .standoff import StandoffError, read_standoff

__all__ = [
    "AdapterError", "ConlluFormatError", "ConlluSentence", "ConlluToken",
    "StandoffError", "convert_conllu", "convert_semeval", "read_conllu",
    "read_standoff",
]
