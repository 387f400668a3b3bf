"""Identification metrics, frequency tables, the synthetic corpus and the CV driver."""
from __future__ import annotations

import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .baselines import (SoftmaxConfig, fit_tfidf, saliency_top_k, tfidf_softmax_top_k,
                        tfidf_top_k, train_tfidf_softmax)
from .corpus import Corpus, Lexicon, TokenizedText, kfold_split
from .embeddings import EmbeddingTable
from .model import ModelConfig, accuracy, train
from .scoring import RankedSelection, extract_corpus

logger = logging.getLogger(__name__)

METHODS = ("TF-IDF", "TF-IDF-softmax", "SalMap-MAX", "SalMap-AVG", "SV-MAX", "SV-AVG")


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def accuracy_at_k(selections: Iterable[RankedSelection], lexicon: Lexicon, k: int,
                  denominator: str = "min", corpus: Corpus | None = None,
                  only_with_truth: bool = False) -> float:
    """Mean per-text fraction of the Top-k selected words found in the lexicon.

    The per-text denominator is the number of items actually selected
    (``min(k, available)``) or always ``k`` with ``denominator="k"``. With
    ``only_with_truth`` (needs ``corpus``) texts that contain no lexicon word
    for their class are left out of the mean.
    """
    _check_k(k)
    if denominator not in ("min", "k"):
        raise ValueError(f"denominator must be 'min' or 'k', got {denominator!r}")
    texts = _text_index(corpus) if only_with_truth else None
    fractions = []
    for sel in selections:
        if texts is not None:
            text = texts[sel.text_id]
            if not any(lexicon.matches(w, sel.label) for w in set(text.tokens)):
                continue
        words = sel.words(k)
        if not words:
            continue
        hits = len({w for w in words if lexicon.matches(w, sel.label)})
        fractions.append(hits / (len(words) if denominator == "min" else k))
    return float(np.mean(fractions)) if fractions else 0.0


def _text_index(corpus: Corpus | Sequence[TokenizedText] | None) -> dict[str, TokenizedText]:
    if corpus is None:
        raise ValueError("this metric needs the evaluated texts")
    return {t.id: t for t in corpus}


def precision_recall_f1(selections: Iterable[RankedSelection], corpus, lexicon: Lexicon,
                        k: int, average: str = "micro") -> tuple[float, float, float]:
    """Precision, recall and F1 of Top-k selections against the lexicon.

    A text's relevant set is its distinct words that are lexicon words for
    its class. Micro averaging pools hits over all texts; macro averages the
    per-text precision (and the per-text recall over texts with a non-empty
    relevant set).
    """
    _check_k(k)
    if average not in ("micro", "macro"):
        raise ValueError(f"average must be 'micro' or 'macro', got {average!r}")
    texts = _text_index(corpus)
    hits_total = sel_total = rel_total = 0
    p_list, r_list = [], []
    for sel in selections:
        words = sel.words(k)
        relevant = {w for w in texts[sel.text_id].tokens if lexicon.matches(w, sel.label)}
        hits = len(set(words) & relevant)
        hits_total += hits
        sel_total += len(words)
        rel_total += len(relevant)
        if words:
            p_list.append(hits / len(words))
        if relevant:
            r_list.append(hits / len(relevant))
    if rel_total == 0:
        raise ValueError("recall is undefined: no evaluated text contains a lexicon word")
    if average == "micro":
        p = hits_total / sel_total if sel_total else 0.0
        r = hits_total / rel_total
    else:
        p = float(np.mean(p_list)) if p_list else 0.0
        r = float(np.mean(r_list))
    return p, r, f1_score(p, r)


def frequency_table(selections: Iterable[RankedSelection], top_n: int = 10,
                    k: int | None = None) -> dict[str, list[tuple[str, int]]]:
    """Per class, the words appearing most often in Top-k lists (ties alphabetical)."""
    counts: dict[str, Counter] = defaultdict(Counter)
    for sel in selections:
        counts[sel.label].update(sel.words(k))
    return {label: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
            for label, c in sorted(counts.items(), key=lambda kv: str(kv[0]))}


@dataclass(frozen=True)
class SynthSpec:
    """Planted-keyword corpus: every text is background noise plus (usually) one class keyword."""

    keywords: Mapping[str, Sequence[str]] = field(
        default_factory=lambda: {"neg": ("bad",), "pos": ("good",)})
    background_size: int = 200
    min_length: int = 8
    max_length: int = 20
    texts_per_class: int = 1000
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        kws = [w for ws in self.keywords.values() for w in ws]
        if len(self.keywords) < 2:
            raise ValueError("need keywords for at least 2 classes")
        if any(not ws for ws in self.keywords.values()):
            raise ValueError("every class needs at least one keyword")
        if len(kws) != len(set(kws)):
            raise ValueError("keyword sets must be disjoint across classes")
        if not 0 <= self.noise < 1:
            raise ValueError(f"noise must be in [0, 1), got {self.noise}")
        if self.background_size < 2 * len(kws):
            raise ValueError(f"background vocabulary ({self.background_size}) must be at least "
                             f"twice the keyword count ({len(kws)})")
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError("need 1 <= min_length <= max_length")
        if self.texts_per_class < 1:
            raise ValueError("texts_per_class must be positive")
        if set(kws) & set(self.background_words()):
            raise ValueError("keywords collide with background word names")

    def background_words(self) -> list[str]:
        width = len(str(self.background_size - 1))
        return [f"w{i:0{width}d}" for i in range(self.background_size)]


def generate_synthetic(spec: SynthSpec) -> tuple[Corpus, Lexicon]:
    rng = np.random.default_rng(spec.seed)
    background = spec.background_words()
    classes = sorted(spec.keywords)
    drafts = []
    for label in classes:
        keywords = list(spec.keywords[label])
        for _ in range(spec.texts_per_class):
            n = int(rng.integers(spec.min_length, spec.max_length + 1))
            planted = rng.random() >= spec.noise
            words = [background[i] for i in rng.integers(0, len(background), n - planted)]
            if planted:
                kw = keywords[int(rng.integers(0, len(keywords)))]
                words.insert(int(rng.integers(0, n)), kw)
            drafts.append((words, label))
    order = rng.permutation(len(drafts))
    texts = tuple(TokenizedText(drafts[j][0], drafts[j][1], f"syn{i:05d}")
                  for i, j in enumerate(order))
    lexicon = Lexicon({w: label for label in classes for w in spec.keywords[label]})
    return Corpus(texts, tuple(classes)), lexicon


@dataclass(frozen=True)
class FoldMetrics:
    fold: str
    accuracy_at_k: float
    precision: float
    recall: float
    f1: float
    classification_accuracy: float | None = None


@dataclass(frozen=True)
class MetricReport:
    method: str
    k: int
    folds: tuple[FoldMetrics, ...]
    accuracy_at_k: float
    precision: float
    recall: float
    f1: float
    classification_accuracy: float | None = None


def _summarize(method: str, k: int, folds: list[FoldMetrics]) -> MetricReport:
    acc = float(np.mean([f.accuracy_at_k for f in folds]))
    p = float(np.mean([f.precision for f in folds]))
    r = float(np.mean([f.recall for f in folds]))
    cls = [f.classification_accuracy for f in folds]
    cls_mean = None if any(c is None for c in cls) else float(np.mean(cls))
    return MetricReport(method, k, tuple(folds), acc, p, r, f1_score(p, r), cls_mean)


@dataclass(frozen=True)
class EvalOptions:
    dedupe: bool = True
    saliency_norm: str = "linf"
    denominator: str = "min"
    average: str = "micro"
    only_with_truth: bool = False


def _fold_metrics(fold: str, selections: list[RankedSelection], texts, lexicon: Lexicon,
                  k: int, opts: EvalOptions, cls_acc: float | None) -> FoldMetrics:
    acc = accuracy_at_k(selections, lexicon, k, opts.denominator, texts, opts.only_with_truth)
    p, r, f1 = precision_recall_f1(selections, texts, lexicon, k, opts.average)
    return FoldMetrics(fold, acc, p, r, f1, cls_acc)


def run_crossval(corpus: Corpus, table: EmbeddingTable, lexicon: Lexicon,
                 methods: Sequence[str] = METHODS, config: ModelConfig | None = None,
                 softmax_config: SoftmaxConfig = SoftmaxConfig(), ks: Sequence[int] = (1, 3, 5),
                 folds: int = 10, seed: int = 0, folds_to_run: int | None = None,
                 options: EvalOptions = EvalOptions(),
                 on_fold: Callable[[str, int], None] | None = None) -> list[MetricReport]:
    """Train and evaluate each method fold by fold.

    Trainable methods (CNN-based and TF-IDF-softmax) are trained on the
    training split of each fold and evaluated on its test split. Plain
    TF-IDF has nothing to train, so it is fitted once on the whole corpus
    and reported as a single ``"all"`` fold. ``folds_to_run`` limits how many
    of the ``folds`` splits are actually used.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown method(s) {unknown}; choose from {list(METHODS)}")
    ks = sorted(set(ks))
    for k in ks:
        _check_k(k)
    k_max = ks[-1]
    if config is None:
        config = ModelConfig(d=table.dim, classes=corpus.classes, seed=seed)
    plan = kfold_split(corpus, folds, seed)
    n_run = folds if folds_to_run is None else min(folds_to_run, folds)
    per_fold: dict[tuple[str, int], list[FoldMetrics]] = defaultdict(list)

    if "TF-IDF" in methods:
        tfidf = fit_tfidf(corpus)
        sels = [tfidf_top_k(tfidf, t, k_max, options.dedupe) for t in corpus]
        for k in ks:
            per_fold["TF-IDF", k].append(
                _fold_metrics("all", sels, corpus.texts, lexicon, k, options, None))

    for f in range(n_run):
        train_set = corpus.subset(plan.train_indices(f))
        test_set = corpus.subset(plan.test_indices(f))
        fold = str(f + 1)
        cnn = {}
        for pooling in ("max", "avg"):
            tag = pooling.upper()
            if f"SV-{tag}" in methods or f"SalMap-{tag}" in methods:
                cfg = _with(config, pooling=pooling)
                cnn[pooling] = train(train_set, table, cfg)
                if on_fold:
                    on_fold(f"CNN-{tag}", f + 1)
        for method in methods:
            if method == "TF-IDF":
                continue
            if method == "TF-IDF-softmax":
                model = train_tfidf_softmax(train_set, softmax_config)
                sels = [tfidf_softmax_top_k(model, t, t.label, k_max, options.dedupe)
                        for t in test_set]
                cls_acc = float(np.mean([model.predict(t.tokens) == t.label for t in test_set]))
                texts = test_set.texts
            else:
                kind, tag = method.split("-")
                model = cnn[tag.lower()]
                if kind == "SV":
                    exts = list(extract_corpus(model, table, test_set, "gold", k_max,
                                               options.dedupe))
                    sels = [e.selection for e in exts]
                    texts = [e.text for e in exts]
                    cls_acc = accuracy(model, table, test_set)
                else:
                    texts = [t for t in test_set if len(t) >= model.config.h]
                    sels = [saliency_top_k(model, table, t, t.label, k_max, options.dedupe,
                                           options.saliency_norm) for t in texts]
                    cls_acc = None
            for k in ks:
                per_fold[method, k].append(
                    _fold_metrics(fold, sels, texts, lexicon, k, options, cls_acc))
        logger.info("fold %d/%d done", f + 1, n_run)

    return [_summarize(m, k, per_fold[m, k]) for m in METHODS if m in methods for k in ks]


def _with(config: ModelConfig, **changes) -> ModelConfig:
    from dataclasses import replace
    return replace(config, **changes)


def _fmt(x: float | None) -> str:
    return "N/A" if x is None else f"{x:.6f}"


def reports_to_csv(reports: Sequence[MetricReport]) -> str:
    """Long-format CSV: ``method,fold,k,metric,value`` with 6-decimal values."""
    out = io.StringIO()
    out.write("method,fold,k,metric,value\n")
    for rep in reports:
        rows = list(rep.folds) + [FoldMetrics("mean", rep.accuracy_at_k, rep.precision,
                                              rep.recall, rep.f1, rep.classification_accuracy)]
        for fm in rows:
            for metric in ("accuracy_at_k", "precision", "recall", "f1",
                           "classification_accuracy"):
                out.write(f"{rep.method},{fm.fold},{rep.k},{metric},{_fmt(getattr(fm, metric))}\n")
    return out.getvalue()


def _pct(x: float | None) -> str:
    return "N/A" if x is None else f"{100 * x:.2f}%"


def reports_to_table(reports: Sequence[MetricReport]) -> str:
    """Two aligned tables: accuracy@k with classification accuracy, then P/R/F1 per k."""
    methods = list(dict.fromkeys(r.method for r in reports))
    ks = sorted({r.k for r in reports})
    by = {(r.method, r.k): r for r in reports}

    head = ["Method", "Classification Accuracy"] + [f"Top-{k}" for k in ks]
    rows = []
    for m in methods:
        first = by[m, ks[0]]
        rows.append([m, _pct(first.classification_accuracy)] + [_pct(by[m, k].accuracy_at_k) for k in ks])
    part1 = _align(head, rows)

    head = ["Method"] + [f"{name}@{k}" for k in ks for name in ("P", "R", "F1")]
    rows = [[m] + [_pct(getattr(by[m, k], a)) for k in ks for a in ("precision", "recall", "f1")]
            for m in methods]
    part2 = _align(head, rows)
    return "Accuracy@k\n" + part1 + "\nPrecision / recall / F1\n" + part2


def _align(head: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)  # noqa: E731
                              for i, (c, w) in enumerate(zip(r, widths))).rstrip()
    sep = "-" * len(fmt(head))
    return "\n".join([fmt(head), sep] + [fmt(r) for r in rows]) + "\n"
