"""One-layer CNN text classifier: training, prediction and persistence."""
from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus
from .embeddings import EmbeddingTable, text_matrix
from .nnkernel import (NONLINEARITIES, POOLINGS, Filter, ForwardTrace, backward,
                       cross_entropy, forward_pass, sgd_step, windows)

logger = logging.getLogger(__name__)

INIT_RANGE = 0.1


@dataclass(frozen=True)
class ModelConfig:
    m: int = 100
    h: int = 1
    d: int = 300
    classes: tuple[str, ...] = ()
    pooling: str = "max"
    nonlinearity: str = "relu"
    lr: float = 0.05
    epochs: int = 25
    seed: int = 0
    l2: float = 0.0
    finetune: bool = False

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.m < 1 or self.h < 1 or self.d < 1:
            raise ValueError(f"m, h and d must be positive (got m={self.m}, h={self.h}, d={self.d})")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
        if len(self.classes) < 2 or len(set(self.classes)) != len(self.classes):
            raise ValueError(f"need at least 2 distinct classes, got {list(self.classes)}")


@dataclass(frozen=True)
class CnnModel:
    """m filters of shape (h, d) with biases, plus the (|C|, m) softmax matrix.

    Row ``c`` of ``softmax_weights`` is the weight vector of class ``c``, so
    ``softmax_weights[c, i]`` is the weight of filter ``i`` for class ``c``.
    """

    config: ModelConfig
    weights: np.ndarray
    biases: np.ndarray
    softmax_weights: np.ndarray

    def __post_init__(self):
        cfg = self.config
        if self.weights.shape != (cfg.m, cfg.h, cfg.d):
            raise ValueError(f"filter weights have shape {self.weights.shape}, "
                             f"expected {(cfg.m, cfg.h, cfg.d)}")
        if self.biases.shape != (cfg.m,):
            raise ValueError(f"biases have shape {self.biases.shape}, expected {(cfg.m,)}")
        if self.softmax_weights.shape != (len(cfg.classes), cfg.m):
            raise ValueError(f"softmax weights have shape {self.softmax_weights.shape}, "
                             f"expected {(len(cfg.classes), cfg.m)}")

    @property
    def classes(self) -> tuple[str, ...]:
        return self.config.classes

    @property
    def filters(self) -> list[Filter]:
        return [Filter(w, b) for w, b in zip(self.weights, self.biases)]

    def class_index(self, label: str) -> int:
        try:
            return self.config.classes.index(label)
        except ValueError:
            raise ValueError(f"class {label!r} not in {list(self.config.classes)}") from None

    def check_table(self, table: EmbeddingTable) -> None:
        if table.dim != self.config.d:
            raise ValueError(f"dimension mismatch: model expects {self.config.d}-d embeddings, "
                             f"table has {table.dim}")


def init_model(config: ModelConfig) -> CnnModel:
    rng = np.random.default_rng(config.seed)
    m, h, d, C = config.m, config.h, config.d, len(config.classes)
    weights = rng.uniform(-INIT_RANGE, INIT_RANGE, (m, h, d))
    biases = rng.uniform(-INIT_RANGE, INIT_RANGE, m)
    softmax_weights = rng.uniform(-INIT_RANGE, INIT_RANGE, (C, m))
    return CnnModel(config, weights, biases, softmax_weights)


def forward(model: CnnModel, X, Xw: np.ndarray | None = None) -> ForwardTrace:
    """Forward pass on a text matrix (a :class:`TextMatrix` or an (n, d) array)."""
    rows = getattr(X, "rows", X)
    rows = np.asarray(rows, dtype=np.float64)
    cfg = model.config
    if rows.shape[0] < cfg.h:
        raise ValueError(f"text shorter than filter ({rows.shape[0]} < {cfg.h})")
    return forward_pass(rows, model.weights, model.biases, model.softmax_weights,
                        cfg.pooling, cfg.nonlinearity, Xw)


def loss(model: CnnModel, X, label: int) -> float:
    return cross_entropy(forward(model, X).probabilities, label)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


ProgressSink = Callable[[EpochStats], None]


def train(corpus: Corpus, table: EmbeddingTable, config: ModelConfig,
          progress: ProgressSink | None = None, history: list | None = None) -> CnnModel:
    """Per-text SGD over a seeded shuffle of the corpus for ``config.epochs`` epochs.

    Texts shorter than the filter width are skipped. With
    ``config.finetune`` the word vectors of the training vocabulary are
    updated too and written back into ``table``.
    """
    if tuple(corpus.classes) != config.classes:
        raise ValueError(f"corpus classes {list(corpus.classes)} differ from "
                         f"model classes {list(config.classes)}")
    if table.dim != config.d:
        raise ValueError(f"dimension mismatch: config d={config.d}, table dim={table.dim}")
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")

    usable = [t for t in corpus.texts if len(t) >= config.h]
    short = len(corpus) - len(usable)
    if short:
        logger.warning("skipping %d text(s) shorter than the filter width h=%d", short, config.h)
    if not usable:
        raise ValueError(f"every text is shorter than the filter width h={config.h}")
    labels = []
    for t in usable:
        if t.label is None:
            raise ValueError(f"text {t.id!r} has no label")
        labels.append(config.classes.index(t.label))

    if config.finetune:
        vocab = sorted({w for t in usable for w in t.tokens})
        index = {w: i for i, w in enumerate(vocab)}
        E = np.stack([table.lookup(w) for w in vocab])
        token_ids = [np.array([index[w] for w in t.tokens]) for t in usable]
    else:
        mats = [text_matrix(table, t.tokens).rows for t in usable]
        wins = [windows(X, config.h) for X in mats]

    model = init_model(config)
    rng = np.random.default_rng([config.seed, 1])
    for epoch in range(1, config.epochs + 1):
        total, correct = 0.0, 0
        for i in rng.permutation(len(usable)):
            if config.finetune:
                X = E[token_ids[i]]
                trace = forward(model, X)
            else:
                X = mats[i]
                trace = forward(model, X, wins[i])
            y = labels[i]
            total += cross_entropy(trace.probabilities, y)
            correct += int(np.argmax(trace.probabilities) == y)
            grads = backward(trace, model.weights, model.softmax_weights, y,
                             config.pooling, config.nonlinearity, input_grad=config.finetune)
            model = sgd_step(model, grads, config.lr, config.l2)
            if config.finetune:
                np.add.at(E, token_ids[i], -config.lr * grads.inputs)
        stats = EpochStats(epoch, total / len(usable), correct / len(usable))
        logger.info("epoch %d: mean loss %.6f, training accuracy %.4f",
                    epoch, stats.loss, stats.accuracy)
        if progress is not None:
            progress(stats)
        if history is not None:
            history.append(stats)

    if config.finetune:
        for w, i in index.items():
            table.set_vector(w, E[i])
    return model


def predict_proba(model: CnnModel, table: EmbeddingTable, tokens: Sequence[str]) -> np.ndarray:
    model.check_table(table)
    return forward(model, text_matrix(table, tokens)).probabilities


def predict(model: CnnModel, table: EmbeddingTable, tokens: Sequence[str]) -> tuple[str, float]:
    """Most probable class and its probability; ties go to the earlier class."""
    probs = predict_proba(model, table, tokens)
    c = int(np.argmax(probs))
    return model.classes[c], float(probs[c])


def accuracy(model: CnnModel, table: EmbeddingTable, corpus: Corpus) -> float:
    texts = [t for t in corpus.texts if len(t) >= model.config.h]
    if not texts:
        raise ValueError("no texts long enough to classify")
    hits = sum(predict(model, table, t.tokens)[0] == t.label for t in texts)
    return hits / len(texts)


# Model file layout (all little-endian):
#   b"SVCN", u16 version
#   u32 m, u32 h, u32 d, u32 epochs, i64 seed, u8 pooling, u8 nonlinearity,
#   u8 flags (bit 0: finetune), f64 lr, f64 l2
#   u16 class count, then per class: u32 byte length + UTF-8 name
#   f64 filter weights (m*h*d, row-major by filter, then row, then dim)
#   f64 biases (m), f64 softmax weights (|C|*m, row-major by class)
#   u32 CRC-32 of every preceding byte
MAGIC = b"SVCN"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<IIIIqBBBdd")


class ModelFormatError(ValueError):
    pass


def save_model(model: CnnModel, path) -> None:
    cfg = model.config
    buf = bytearray(MAGIC)
    buf += struct.pack("<H", FORMAT_VERSION)
    buf += _HEAD.pack(cfg.m, cfg.h, cfg.d, cfg.epochs, cfg.seed,
                      POOLINGS.index(cfg.pooling), NONLINEARITIES.index(cfg.nonlinearity),
                      int(cfg.finetune), cfg.lr, cfg.l2)
    buf += struct.pack("<H", len(cfg.classes))
    for name in cfg.classes:
        raw = name.encode("utf-8")
        buf += struct.pack("<I", len(raw)) + raw
    for arr in (model.weights, model.biases, model.softmax_weights):
        buf += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    buf += struct.pack("<I", zlib.crc32(buf))
    Path(path).write_bytes(bytes(buf))


def load_model(path) -> CnnModel:
    data = Path(path).read_bytes()
    if len(data) < 6 + _HEAD.size + 2 + 4 or data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise ModelFormatError(f"{path}: checksum mismatch (truncated or corrupt file)")
    try:
        m, h, d, epochs, seed, pool, nonlin, flags, lr, l2 = _HEAD.unpack_from(data, 6)
        pos = 6 + _HEAD.size
        (n_classes,) = struct.unpack_from("<H", data, pos)
        pos += 2
        classes = []
        for _ in range(n_classes):
            (size,) = struct.unpack_from("<I", data, pos)
            pos += 4
            classes.append(data[pos:pos + size].decode("utf-8"))
            pos += size
        config = ModelConfig(m=m, h=h, d=d, classes=tuple(classes), pooling=POOLINGS[pool],
                             nonlinearity=NONLINEARITIES[nonlin], lr=lr, epochs=epochs,
                             seed=seed, l2=l2, finetune=bool(flags & 1))
        arrays = []
        for shape in ((m, h, d), (m,), (n_classes, m)):
            count = int(np.prod(shape))
            if pos + 8 * count > len(data) - 4:
                raise ModelFormatError(f"{path}: parameter block is truncated")
            arrays.append(np.frombuffer(data, "<f8", count, pos).astype(np.float64).reshape(shape))
            pos += 8 * count
    except (struct.error, IndexError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from None
    if pos != len(data) - 4:
        raise ModelFormatError(f"{path}: {len(data) - 4 - pos} unexpected trailing bytes")
    return CnnModel(config, *arrays)
