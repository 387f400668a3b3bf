"""Comparison methods: class-split TF-IDF, softmax on TF-IDF features, saliency maps."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, TokenizedText
from .embeddings import EmbeddingTable, text_matrix
from .model import CnnModel, forward
from .nnkernel import backprop_representation, cross_entropy, softmax
from .scoring import RankedSelection, ScoreVector, rank_positions


def _idf(texts: Sequence[TokenizedText]) -> dict[str, float]:
    df = Counter(w for t in texts for w in set(t.tokens))
    N = len(texts)
    return {w: math.log(N / c) for w, c in df.items()}


def term_frequencies(tokens: Sequence[str]) -> dict[str, float]:
    n = len(tokens)
    return {w: c / n for w, c in Counter(tokens).items()}


@dataclass(frozen=True)
class TfidfModel:
    """``idf`` is over the whole corpus; ``class_idf[c]`` over class ``c``'s texts only."""

    vocabulary: dict[str, int]
    idf: dict[str, float]
    class_idf: dict[str, dict[str, float]]
    classes: tuple[str, ...]

    def tfidf(self, tokens: Sequence[str], label: str | None = None) -> dict[str, float]:
        idf = self.idf if label is None else self.class_idf.get(label, {})
        return {w: tf * idf.get(w, 0.0) for w, tf in term_frequencies(tokens).items()}


def fit_tfidf(corpus: Corpus) -> TfidfModel:
    if len(corpus) == 0:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    vocab = sorted({w for t in corpus for w in t.tokens})
    class_idf = {}
    for c in corpus.classes:
        texts = [t for t in corpus if t.label == c]
        class_idf[c] = _idf(texts) if texts else {}
    return TfidfModel({w: i for i, w in enumerate(vocab)}, _idf(corpus.texts),
                      class_idf, tuple(corpus.classes))


def tfidf_scores(model: TfidfModel, text: TokenizedText, label: str | None = None) -> np.ndarray:
    """Per-position TF-IDF of ``text`` under its class's sub-corpus statistics."""
    label = text.label if label is None else label
    values = model.tfidf(text.tokens, label)
    return np.array([values[w] for w in text.tokens])


def tfidf_top_k(model: TfidfModel, text: TokenizedText, k: int, dedupe: bool = True,
                label: str | None = None) -> RankedSelection:
    label = text.label if label is None else label
    return rank_positions(tfidf_scores(model, text, label), text.tokens, k, dedupe, text.id, label)


@dataclass(frozen=True)
class SoftmaxConfig:
    lr: float = 1.0
    epochs: int = 25
    seed: int = 0
    l2: float = 0.0


@dataclass(frozen=True)
class TfidfSoftmaxModel:
    tfidf: TfidfModel
    softmax_weights: np.ndarray  # (|C|, |V|)

    @property
    def classes(self) -> tuple[str, ...]:
        return self.tfidf.classes

    def features(self, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Sparse whole-corpus TF-IDF vector as (vocabulary indices, values)."""
        vocab = self.tfidf.vocabulary
        pairs = [(vocab[w], v) for w, v in self.tfidf.tfidf(tokens).items() if w in vocab]
        if not pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        idx, vals = zip(*pairs)
        return np.array(idx, dtype=np.int64), np.array(vals)

    def predict_proba(self, tokens: Sequence[str]) -> np.ndarray:
        idx, vals = self.features(tokens)
        return softmax(self.softmax_weights[:, idx] @ vals)

    def predict(self, tokens: Sequence[str]) -> str:
        return self.classes[int(np.argmax(self.predict_proba(tokens)))]


def train_tfidf_softmax(corpus: Corpus, config: SoftmaxConfig = SoftmaxConfig(),
                        history: list | None = None) -> TfidfSoftmaxModel:
    """Softmax regression on TF-IDF features, per-text SGD from zero weights."""
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    tfidf = fit_tfidf(corpus)
    C, V = len(corpus.classes), len(tfidf.vocabulary)
    model = TfidfSoftmaxModel(tfidf, np.zeros((C, V)))
    U = model.softmax_weights
    feats = [model.features(t.tokens) for t in corpus]
    labels = [corpus.class_index(t.label) for t in corpus]
    rng = np.random.default_rng([config.seed, 2])
    for _ in range(config.epochs):
        total = 0.0
        for i in rng.permutation(len(corpus)):
            idx, vals = feats[i]
            p = softmax(U[:, idx] @ vals)
            total += cross_entropy(p, labels[i])
            p[labels[i]] -= 1.0
            grad = np.outer(p, vals)
            if config.l2:
                grad += config.l2 * U[:, idx]
            U[:, idx] -= config.lr * grad
        if history is not None:
            history.append(total / len(corpus))
    return model


def tfidf_softmax_scores(model: TfidfSoftmaxModel, text: TokenizedText, label: str) -> np.ndarray:
    if label not in model.classes:
        raise ValueError(f"class {label!r} not in {list(model.classes)}")
    c = model.classes.index(label)
    values = model.tfidf.tfidf(text.tokens)
    vocab = model.tfidf.vocabulary
    return np.array([model.softmax_weights[c, vocab[w]] * values[w] if w in vocab else 0.0
                     for w in text.tokens])


def tfidf_softmax_top_k(model: TfidfSoftmaxModel, text: TokenizedText, label: str, k: int,
                        dedupe: bool = True) -> RankedSelection:
    scores = tfidf_softmax_scores(model, text, label)
    return rank_positions(scores, text.tokens, k, dedupe, text.id, label)


def saliency_gradient(model: CnnModel, table: EmbeddingTable, text: TokenizedText,
                      label: str) -> np.ndarray:
    """Gradient of the class logit with respect to the (n, d) input matrix."""
    model.check_table(table)
    c = model.class_index(label)
    trace = forward(model, text_matrix(table, text.tokens))
    cfg = model.config
    _, _, dX = backprop_representation(trace, model.weights, model.softmax_weights[c],
                                       cfg.pooling, cfg.nonlinearity, input_grad=True)
    return dX


def saliency_scores(model: CnnModel, table: EmbeddingTable, text: TokenizedText,
                    label: str, norm: str = "linf") -> ScoreVector:
    """Per-word magnitude of the class-logit gradient (max-abs or L2 over dimensions)."""
    dX = saliency_gradient(model, table, text, label)
    if norm == "linf":
        scores = np.abs(dX).max(axis=1)
    elif norm == "l2":
        scores = np.sqrt((dX * dX).sum(axis=1))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return ScoreVector(scores, label, 1)


def saliency_top_k(model: CnnModel, table: EmbeddingTable, text: TokenizedText, label: str,
                   k: int, dedupe: bool = True, norm: str = "linf") -> RankedSelection:
    sv = saliency_scores(model, table, text, label, norm)
    return rank_positions(sv.scores, text.tokens, k, dedupe, text.id, label)
