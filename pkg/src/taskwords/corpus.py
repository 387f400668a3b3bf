"""Labeled short-text corpora, ground-truth lexicons and fold plans."""
from __future__ import annotations

import logging
import string
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

#: Lexicon class marking a word as task-specific for every class.
WILDCARD = "*"

_ASCII_PUNCT = frozenset(string.punctuation)


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch)[0] in "PS"


def _lstrip_punct(tok: str, keep: str = "") -> str:
    i = 0
    while i < len(tok) and _is_punct(tok[i]) and tok[i] not in keep:
        i += 1
    return tok[i:]


def _strip_punct(tok: str) -> str:
    tok = _lstrip_punct(tok)
    j = len(tok)
    while j > 0 and _is_punct(tok[j - 1]):
        j -= 1
    return tok[:j]


def default_stopwords() -> frozenset[str]:
    """The bundled English stop list (``data/stopwords.txt``)."""
    text = resources.files("taskwords").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(
        w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#")
    )


def tokenize(raw: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Split a short text into lowercase word tokens.

    Tokens starting with ``@`` are dropped, a leading ``#`` is removed from
    hashtags, and leading/trailing punctuation is stripped from every token.
    Tokens that end up empty (pure punctuation) disappear. Internal
    punctuation such as the apostrophe in ``can't`` is kept.

    >>> tokenize("@user #racism is bad .")
    ['racism', 'is', 'bad']
    """
    stop = frozenset(stopwords) if stopwords is not None else frozenset()
    out = []
    for tok in raw.lower().split():
        tok = _lstrip_punct(tok, keep="@")
        if tok.startswith("@"):
            continue
        tok = _strip_punct(tok)
        if tok and tok not in stop:
            out.append(tok)
    return out


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]
    label: str | None
    id: str

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"text {self.id!r} has no tokens")
        if any(not t for t in self.tokens):
            raise ValueError(f"text {self.id!r} contains an empty token")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    """An immutable sequence of texts plus the ordered class set.

    Texts with ``label=None`` are allowed (unlabeled input for prediction);
    labeled texts must use one of ``classes``.
    """

    texts: tuple[TokenizedText, ...]
    classes: tuple[str, ...]
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "texts", tuple(self.texts))
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < 2:
            raise ValueError(f"a corpus needs at least 2 classes, got {list(self.classes)}")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")
        known = set(self.classes)
        for t in self.texts:
            if t.label is not None and t.label not in known:
                raise ValueError(f"text {t.id!r} has unknown label {t.label!r}")

    def __len__(self) -> int:
        return len(self.texts)

    def __iter__(self):
        return iter(self.texts)

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus(tuple(self.texts[i] for i in indices), self.classes)

    def class_index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ValueError(f"unknown class {label!r}; classes are {list(self.classes)}") from None


def _read_lines(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def load_labeled_corpus(path, stopwords=None, min_length: int = 1,
                        classes: Sequence[str] | None = None) -> Corpus:
    """Read a ``label<TAB>raw text`` file into a :class:`Corpus`.

    Lines whose text tokenizes to fewer than ``min_length`` tokens are
    skipped and counted in ``Corpus.skipped``. Classes are sorted unless
    given explicitly.
    """
    texts = []
    skipped = 0
    for lineno, line in _read_lines(path):
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: malformed line, expected '<label>\\t<text>'")
        label, raw = line.split("\t", 1)
        label = label.strip()
        if not label:
            raise ValueError(f"{path}:{lineno}: empty label")
        tokens = tokenize(raw, stopwords)
        if len(tokens) < max(min_length, 1):
            skipped += 1
            continue
        texts.append(TokenizedText(tokens, label, f"L{lineno}"))
    if not texts:
        raise ValueError(f"{path}: no texts")
    if skipped:
        logger.warning("%s: skipped %d text(s) that were too short after tokenization", path, skipped)
    if classes is None:
        classes = sorted({t.label for t in texts})
    return Corpus(tuple(texts), tuple(classes), skipped=skipped)


def load_unlabeled_texts(path, classes: Sequence[str], stopwords=None,
                         min_length: int = 1) -> Corpus:
    """Read one raw text per line; labels are left empty.

    A ``label<TAB>`` prefix, if present, is ignored.
    """
    texts = []
    skipped = 0
    for lineno, line in _read_lines(path):
        raw = line.split("\t", 1)[1] if "\t" in line else line
        tokens = tokenize(raw, stopwords)
        if len(tokens) < max(min_length, 1):
            skipped += 1
            continue
        texts.append(TokenizedText(tokens, None, f"L{lineno}"))
    if not texts:
        raise ValueError(f"{path}: no texts")
    return Corpus(tuple(texts), tuple(classes), skipped=skipped)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in corpus.texts:
            if t.label is None:
                raise ValueError(f"text {t.id!r} has no label; cannot write a labeled corpus")
            fh.write(f"{t.label}\t{' '.join(t.tokens)}\n")


@dataclass(frozen=True)
class Lexicon:
    """Ground-truth task words. ``entries`` maps word -> class or ``WILDCARD``."""

    entries: dict[str, str]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word) -> bool:
        return word in self.entries

    def matches(self, word: str, label: str | None) -> bool:
        """True if ``word`` is a task word for ``label``."""
        cls = self.entries.get(word)
        if cls is None:
            return False
        return cls == WILDCARD or cls == label

    def words_for(self, label: str | None) -> set[str]:
        return {w for w, c in self.entries.items() if c == WILDCARD or c == label}


def load_lexicon(path) -> Lexicon:
    entries: dict[str, str] = {}
    for _, line in _read_lines(path):
        if "\t" in line:
            word, cls = line.split("\t", 1)
            cls = cls.strip() or WILDCARD
        else:
            word, cls = line, WILDCARD
        word = word.strip().lower()
        if word:
            entries[word] = cls
    return Lexicon(entries)


def save_lexicon(lexicon: Lexicon, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, cls in lexicon.entries.items():
            fh.write(word + "\n" if cls == WILDCARD else f"{word}\t{cls}\n")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]

    def sizes(self) -> list[int]:
        return [self.assignments.count(f) for f in range(self.k)]


def kfold_split(corpus: Corpus | Sequence, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle, then round-robin fold assignment."""
    n = len(corpus)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} texts into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    assignments = [0] * n
    for pos, idx in enumerate(order):
        assignments[int(idx)] = pos % k
    return FoldPlan(k, tuple(assignments))
