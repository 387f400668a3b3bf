"""Task-specific word and phrase identification with convolutional score vectors.

Train a one-layer CNN on labeled short texts, then rank each text's words
(or h-word phrases) by projecting the softmax weights of a class onto the
filters' feature vectors.
"""

__version__ = "0.1.0"

from .corpus import (Corpus, FoldPlan, Lexicon, TokenizedText, kfold_split, load_labeled_corpus,
                     load_lexicon, tokenize)
from .embeddings import EmbeddingTable, TextMatrix, load_embeddings, text_matrix
from .model import CnnModel, ModelConfig, forward, init_model, load_model, predict, save_model, train
from .scoring import (RankedSelection, ScoreVector, extract_corpus, score_vector, top_k_phrases,
                      top_k_words)

__all__ = [
    "Corpus", "FoldPlan", "Lexicon", "TokenizedText", "kfold_split", "load_labeled_corpus",
    "load_lexicon", "tokenize", "EmbeddingTable", "TextMatrix", "load_embeddings", "text_matrix",
    "CnnModel", "ModelConfig", "forward", "init_model", "load_model", "predict", "save_model",
    "train", "RankedSelection", "ScoreVector", "extract_corpus", "score_vector", "top_k_phrases",
    "top_k_words",
]
