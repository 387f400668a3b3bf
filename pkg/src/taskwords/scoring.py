"""Score vectors from a trained CNN and Top-k word/phrase selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .corpus import Corpus, TokenizedText
from .embeddings import EmbeddingTable, text_matrix
from .model import CnnModel, forward
from .nnkernel import ForwardTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray  # one entry per window of h words
    label: str
    h: int = 1

    @property
    def positions(self) -> np.ndarray:
        return np.arange(len(self.scores))

    def __len__(self) -> int:
        return len(self.scores)


class RankedItem(NamedTuple):
    text: str
    position: int
    score: float


@dataclass(frozen=True)
class RankedSelection:
    """Top-k items of one text, best first; ties keep the earlier position."""

    items: tuple[RankedItem, ...]
    k: int
    text_id: str = ""
    label: str | None = None

    def words(self, k: int | None = None) -> list[str]:
        return [it.text for it in self.items[:k]]

    def __len__(self) -> int:
        return len(self.items)


def score_vector(trace: ForwardTrace, model: CnnModel, label: str) -> ScoreVector:
    """Weight each filter's feature vector by that filter's softmax weight for ``label``."""
    c = model.class_index(label)
    scores = model.softmax_weights[c] @ trace.feature_vectors
    return ScoreVector(scores, label, trace.h)


def rank_positions(scores: Sequence[float], surfaces: Sequence[str], k: int,
                   dedupe: bool = False, text_id: str = "",
                   label: str | None = None) -> RankedSelection:
    """Sort positions by descending score (ascending position on ties) and keep ``k``.

    With ``dedupe`` only the best-ranked occurrence of each surface form stays.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != len(surfaces):
        raise ValueError(f"{len(scores)} scores for {len(surfaces)} items")
    # lexsort sorts by the last key first
    order = np.lexsort((np.arange(len(scores)), -scores))
    items = []
    seen = set()
    for j in order:
        s = surfaces[j]
        if dedupe:
            if s in seen:
                continue
            seen.add(s)
        items.append(RankedItem(s, int(j), float(scores[j])))
        if len(items) == k:
            break
    return RankedSelection(tuple(items), k, text_id, label)


def top_k_words(text: TokenizedText, sv: ScoreVector, k: int, dedupe: bool = True) -> RankedSelection:
    if len(sv) != len(text):
        raise ValueError(f"score vector has {len(sv)} entries for a {len(text)}-word text "
                         "(word scores need a width-1 filter)")
    return rank_positions(sv.scores, text.tokens, k, dedupe, text.id, sv.label)


def phrase_surfaces(tokens: Sequence[str], h: int) -> list[str]:
    if len(tokens) < h:
        raise ValueError(f"text shorter than phrase width ({len(tokens)} < {h})")
    return [" ".join(tokens[j:j + h]) for j in range(len(tokens) - h + 1)]


def top_k_phrases(text: TokenizedText, sv: ScoreVector, k: int, h: int,
                  dedupe: bool = False) -> RankedSelection:
    surfaces = phrase_surfaces(text.tokens, h)
    if len(sv) != len(surfaces):
        raise ValueError(f"score vector has {len(sv)} entries, expected {len(surfaces)} windows")
    return rank_positions(sv.scores, surfaces, k, dedupe, text.id, sv.label)


@dataclass(frozen=True)
class Extraction:
    text: TokenizedText
    label: str  # class whose score vector was used
    predicted: str
    probability: float
    selection: RankedSelection
    source: str  # "gold" or "predicted"


def extract_corpus(model: CnnModel, table: EmbeddingTable, corpus: Corpus | Sequence[TokenizedText],
                   class_source: str = "gold", k: int = 5,
                   dedupe: bool | None = None) -> Iterator[Extraction]:
    """Yield the Top-k words (h=1) or phrases (h>1) of every text.

    ``class_source="gold"`` scores each text for its own label; texts without
    a label fall back to the predicted class. Texts shorter than the filter
    width are skipped.
    """
    if class_source not in ("gold", "predicted"):
        raise ValueError(f"class source must be 'gold' or 'predicted', got {class_source!r}")
    model.check_table(table)
    h = model.config.h
    if dedupe is None:
        dedupe = h == 1
    short = 0
    for text in corpus:
        if len(text) < h:
            short += 1
            continue
        trace = forward(model, text_matrix(table, text.tokens))
        c = int(np.argmax(trace.probabilities))
        predicted = model.classes[c]
        source = class_source if text.label is not None else "predicted"
        label = text.label if source == "gold" else predicted
        sv = score_vector(trace, model, label)
        if h == 1:
            sel = top_k_words(text, sv, k, dedupe)
        else:
            sel = top_k_phrases(text, sv, k, h, dedupe)
        yield Extraction(text, label, predicted, float(trace.probabilities[c]), sel, source)
    if short:
        logger.warning("skipped %d text(s) shorter than h=%d", short, h)


def format_record(ext: Extraction, method: str | None = None) -> str:
    """One tab-separated report line: id, label, predicted, then item/score pairs."""
    gold = ext.text.label if ext.text.label is not None else "-"
    cols = [method] if method else []
    cols += [ext.text.id, gold, ext.predicted, ext.source]
    for it in ext.selection.items:
        cols += [it.text, f"{it.score:.6f}"]
    return "\t".join(cols)


def highlight(text: TokenizedText, selection: RankedSelection, h: int = 1) -> str:
    """Render the text with selected words/phrases bracketed and ranked: ``[bad]^1``.

    Every occurrence of a selected surface form is marked.
    """
    tokens = list(text.tokens)
    rank = {}
    for r, it in enumerate(selection.items, 1):
        rank.setdefault(it.text, r)
    out = []
    j = 0
    n = len(tokens)
    while j < n:
        span = " ".join(tokens[j:j + h]) if j + h <= n else None
        if span is not None and span in rank:
            out.append(f"[{span}]^{rank[span]}")
            j += h
        else:
            out.append(tokens[j])
            j += 1
    return " ".join(out)
