import numpy as np
import pytest

from taskwords.embeddings import EmbeddingTable
from taskwords.evaluation import SynthSpec, generate_synthetic
from taskwords.model import ModelConfig, train


@pytest.fixture
def tiny_table():
    return EmbeddingTable(2, {"cat": np.array([1.0, 2.0]), "dog": np.array([3.0, 4.0])})


@pytest.fixture(scope="session")
def small_synth():
    """400-text planted-keyword corpus (neg=bad, pos=good)."""
    return generate_synthetic(SynthSpec(texts_per_class=200, noise=0.0, seed=3))


@pytest.fixture(scope="session")
def small_table():
    return EmbeddingTable(300, oov_seed=5)


@pytest.fixture(scope="session")
def trained_avg(small_synth, small_table):
    corpus, _ = small_synth
    cfg = ModelConfig(m=10, h=1, d=300, classes=corpus.classes, pooling="avg", epochs=10, seed=1)
    history = []
    model = train(corpus, small_table, cfg, history=history)
    return model, history


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
