"""Pretrained word vectors (word2vec text/binary) and text matrices."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

OOV_RANGE = 0.25


class EmbeddingFormatError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    """Word -> vector map with deterministic vectors for unknown words.

    Unknown words get components drawn uniformly from [-0.25, 0.25] by a
    generator seeded from ``(oov_seed, word)``; results are cached, so the
    table mutates on lookup. Serialize lookups if sharing across threads.
    """

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    oov_seed: int = 0
    oov_cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"embedding dimension must be positive, got {self.dim}")
        for word, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise EmbeddingFormatError(
                    f"vector for {word!r} has {vec.shape[0]} components, expected {self.dim}")
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"vector for {word!r} has non-finite components")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word) -> bool:
        return word in self.vectors

    def lookup(self, word: str) -> np.ndarray:
        vec = self.vectors.get(word)
        if vec is not None:
            return vec
        vec = self.oov_cache.get(word)
        if vec is None:
            vec = _oov_vector(self.oov_seed, word, self.dim)
            self.oov_cache[word] = vec
        return vec

    def set_vector(self, word: str, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"expected a length-{self.dim} vector")
        self.vectors[word] = vec
        self.oov_cache.pop(word, None)


def _oov_vector(seed: int, word: str, dim: int) -> np.ndarray:
    # hash() is salted per process; sha256 keeps vectors stable across runs
    digest = hashlib.sha256(f"{seed}\x00{word}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    return rng.uniform(-OOV_RANGE, OOV_RANGE, dim)


def lookup(table: EmbeddingTable, word: str) -> np.ndarray:
    return table.lookup(word)


@dataclass(frozen=True)
class TextMatrix:
    rows: np.ndarray  # (n, d)
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return self.rows.shape[0]


def text_matrix(table: EmbeddingTable, tokens: Sequence[str]) -> TextMatrix:
    if len(tokens) == 0:
        raise ValueError("cannot build a text matrix from an empty token sequence")
    rows = np.stack([table.lookup(t) for t in tokens])
    return TextMatrix(rows, tuple(tokens))


def load_embeddings(path, format: str = "text", oov_seed: int = 0,
                    vocab: set[str] | None = None) -> EmbeddingTable:
    """Load word2vec-style vectors.

    ``format`` is ``"text"`` or ``"binary"`` (``"w2v-text"``/``"w2v-binary"``
    are accepted too). If ``vocab`` is given, only those words are kept,
    which matters for multi-gigabyte pretrained files.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    fmt = format.removeprefix("w2v-")
    if fmt == "text":
        table = _load_text(path, oov_seed, vocab)
    elif fmt == "binary":
        table = _load_binary(path, oov_seed, vocab)
    else:
        raise ValueError(f"unknown embeddings format {format!r}")
    logger.info("loaded %d vectors of dimension %d from %s", len(table), table.dim, path)
    return table


def _parse_header(fields: list[str]) -> tuple[int, int] | None:
    if len(fields) != 2:
        return None
    try:
        return int(fields[0]), int(fields[1])
    except ValueError:
        return None


def _load_text(path: Path, oov_seed: int, vocab) -> EmbeddingTable:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8", errors="strict") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.rstrip("\r\n").split(" ")
            fields = [f for f in fields if f]
            if not fields:
                continue
            if lineno == 1:
                header = _parse_header(fields)
                if header is not None:
                    if header[1] < 1:
                        raise EmbeddingFormatError(f"{path}: header declares dimension {header[1]}")
                    dim = header[1]
                    continue
            word, values = fields[0], fields[1:]
            if dim is None:
                if not values:
                    raise EmbeddingFormatError(f"{path}:{lineno}: word {word!r} has no components")
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: word {word!r} has {len(values)} components, expected {dim}")
            if vocab is not None and word not in vocab:
                continue
            try:
                vectors[word] = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: bad number in vector for {word!r}") from None
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no vectors")
    return EmbeddingTable(dim, vectors, oov_seed)


def _load_binary(path: Path, oov_seed: int, vocab) -> EmbeddingTable:
    data = path.read_bytes()
    nl = data.find(b"\n")
    header = _parse_header(data[:nl].decode("ascii", "replace").split()) if nl >= 0 else None
    if header is None:
        raise EmbeddingFormatError(f"{path}: missing '<count> <dim>' header")
    count, dim = header
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: header declares dimension {dim}")
    nbytes = 4 * dim
    pos = nl + 1
    vectors: dict[str, np.ndarray] = {}
    for i in range(count):
        while pos < len(data) and data[pos:pos + 1] == b"\n":
            pos += 1
        sp = data.find(b" ", pos)
        if sp < 0:
            raise EmbeddingFormatError(f"{path}: truncated at entry {i} of {count}")
        word = data[pos:sp].decode("utf-8", "replace")
        start = sp + 1
        if start + nbytes > len(data):
            raise EmbeddingFormatError(f"{path}: truncated vector for {word!r} (entry {i} of {count})")
        if vocab is None or word in vocab:
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=start).astype(np.float64)
            vectors[word] = vec
        pos = start + nbytes
    return EmbeddingTable(dim, vectors, oov_seed)


def save_embeddings(table: EmbeddingTable, path, format: str = "text") -> None:
    """Write ``table.vectors`` in word2vec text or binary layout."""
    fmt = format.removeprefix("w2v-")
    words = list(table.vectors)
    if fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(words)} {table.dim}\n")
            for w in words:
                fh.write(w + " " + " ".join(repr(float(x)) for x in table.vectors[w]) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(f"{len(words)} {table.dim}\n".encode("ascii"))
            for w in words:
                fh.write(w.encode("utf-8") + b" ")
                fh.write(np.asarray(table.vectors[w], dtype="<f4").tobytes())
                fh.write(b"\n")
    else:
        raise ValueError(f"unknown embeddings format {format!r}")
