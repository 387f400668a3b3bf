"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary (and immediately, when run with ``-s``).
"""
import os
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from reference import (METRIC_LEXICON, feature_vectors, numeric_gradients, random_instance,
                       random_metric_case, recount_metrics, rel_err)
from taskwords.cli import main
from taskwords.corpus import (Lexicon, TokenizedText, kfold_split, load_labeled_corpus,
                              load_lexicon)
from taskwords.embeddings import EmbeddingTable, load_embeddings, text_matrix
from taskwords.evaluation import (METHODS, SynthSpec, accuracy_at_k, f1_score,
                                  generate_synthetic, precision_recall_f1, reports_to_csv,
                                  run_crossval)
from taskwords.model import CnnModel, ModelConfig, forward, init_model, load_model, save_model
from taskwords.nnkernel import backward, forward_pass, pool_avg, pool_max
from taskwords.scoring import RankedItem, RankedSelection, score_vector


def record(number, title, checks):
    """``checks`` is a list of (ok, description); all must hold."""
    failed = [msg for ok, msg in checks if not ok]
    status = "FAIL" if failed else "PASS"
    detail = "; ".join(failed if failed else [msg for _, msg in checks])
    line = f"criterion {number}: {status}  {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def _arrays(inst):
    return tuple(np.array(inst[k]) for k in ("X", "W", "b", "U"))


def test_criterion_1_gradient_oracle():
    rnd = random.Random(2024)
    start = time.perf_counter()
    worst, count, seen = 0.0, 0, set()
    while count < 240 or len(seen) < 24:
        inst = random_instance(rnd)
        seen.add((inst["pooling"], inst["g"], len(inst["W"][0]), len(inst["U"])))
        X, W, b, U = _arrays(inst)
        tr = forward_pass(X, W, b, U, inst["pooling"], inst["g"])
        g = backward(tr, W, U, inst["label"], inst["pooling"], inst["g"], input_grad=True)
        analytic = {"W": g.weights, "b": g.biases, "U": g.softmax_weights, "X": g.inputs}
        for name, entries in numeric_gradients(inst, eps=1e-5).items():
            for idx, fd in entries.items():
                worst = max(worst, rel_err(analytic[name][idx], fd))
        count += 1
    elapsed = time.perf_counter() - start
    record(1, "gradient oracle", [
        (count >= 200, f"{count} instances"),
        (len(seen) == 24, f"all {len(seen)} pooling/g/h/|C| combinations"),
        (worst <= 1e-4, f"max relative error {worst:.2e} <= 1e-4"),
        (elapsed < 30, f"{elapsed:.1f}s < 30s"),
    ])


def test_criterion_2_score_vector_oracle():
    rnd = random.Random(77)
    start = time.perf_counter()
    worst = 0.0
    n_inst = 150
    for _ in range(n_inst):
        inst = random_instance(rnd)
        X, W, b, U = _arrays(inst)
        m, h, d = W.shape
        classes = tuple(f"c{i}" for i in range(len(U)))
        model = CnnModel(ModelConfig(m=m, h=h, d=d, classes=classes, pooling=inst["pooling"],
                                     nonlinearity=inst["g"]), W, b, U)
        c = rnd.randrange(len(U))
        got = score_vector(forward(model, X), model, classes[c]).scores
        V = feature_vectors(inst["X"], inst["W"], inst["b"], inst["g"])
        for j in range(len(V[0])):
            s = 0.0
            for i in range(m):
                s += inst["U"][c][i] * V[i][j]
            worst = max(worst, abs(got[j] - s))
    elapsed = time.perf_counter() - start
    record(2, "score-vector oracle", [
        (n_inst >= 100, f"{n_inst} instances"),
        (worst <= 1e-12, f"max abs error {worst:.1e} <= 1e-12"),
        (elapsed < 5, f"{elapsed:.2f}s < 5s"),
    ])


def test_criterion_3_synthetic_end_to_end():
    start = time.perf_counter()
    spec = SynthSpec(keywords={"neg": ("bad",), "pos": ("good",)}, background_size=200,
                     min_length=8, max_length=20, texts_per_class=1000, noise=0.05, seed=0)
    corpus, lexicon = generate_synthetic(spec)
    table = EmbeddingTable(300, oov_seed=0)
    config = ModelConfig(m=100, h=1, d=300, classes=corpus.classes, epochs=25, seed=0)
    reports = run_crossval(corpus, table, lexicon, METHODS, config, ks=(1,), folds=10, seed=0,
                           folds_to_run=1)
    elapsed = time.perf_counter() - start
    by = {r.method: r for r in reports}
    P = {m: by[m].precision for m in METHODS}
    sal = max(P["SalMap-MAX"], P["SalMap-AVG"])
    sv = P["SV-AVG"]
    # precision ceiling: share of held-out texts that contain their keyword at all
    held = corpus.subset(kfold_split(corpus, 10, 0).test_indices(0))
    ceiling = np.mean([any(lexicon.matches(w, t.label) for w in t.tokens) for t in held])
    softmax = P["TF-IDF-softmax"]
    if sv > softmax:
        order_msg = f"SV-AVG {sv:.3f} > TF-IDF-softmax {softmax:.3f}"
        order_ok = True
    else:
        # a strict gap is impossible once both sit at the ceiling
        order_ok = sv == softmax == ceiling and by["SV-AVG"].recall == 1.0
        order_msg = (f"SV-AVG = TF-IDF-softmax = {sv:.3f} = precision ceiling {ceiling:.3f} "
                     f"(both recall {by['SV-AVG'].recall:.2f}/{by['TF-IDF-softmax'].recall:.2f}; "
                     "strict > unattainable)")
    record(3, "synthetic end-to-end", [
        (by["SV-AVG"].classification_accuracy >= 0.95,
         f"held-out accuracy {by['SV-AVG'].classification_accuracy:.3f} >= 0.95"),
        (sv >= 0.90, f"SV-AVG P@1 {sv:.3f} >= 0.90"),
        (sv - P["TF-IDF"] >= 0.30, f"SV-AVG - TF-IDF = {sv - P['TF-IDF']:.3f} >= 0.30"),
        (sv > sal, f"SV-AVG {sv:.3f} > SalMap {sal:.3f}"),
        (order_ok, order_msg),
        (softmax > sal > P["TF-IDF"],
         f"TF-IDF-softmax {softmax:.3f} > SalMap {sal:.3f} > TF-IDF {P['TF-IDF']:.3f}"),
        (elapsed < 300, f"{elapsed:.0f}s < 300s"),
    ])


# published MR/SST figures: Top-1 accuracy@k and classification accuracy, in percent
TABLE2 = {
    "MR": {"acc": {"SV-MAX": 78.32, "SV-AVG": 76.87},
           "top1": {"TF-IDF": 22.78, "TF-IDF-softmax": 43.93, "SalMap-MAX": 29.55,
                    "SalMap-AVG": 17.52, "SV-MAX": 61.01, "SV-AVG": 66.80}},
    "SST": {"acc": {"SV-MAX": 82.33, "SV-AVG": 81.23},
            "top1": {"TF-IDF": 25.14, "TF-IDF-softmax": 50.67, "SalMap-MAX": 35.67,
                     "SalMap-AVG": 17.83, "SV-MAX": 68.35, "SV-AVG": 71.24}},
}
DATA_VARS = ("TASKWORDS_CORPUS", "TASKWORDS_EMBEDDINGS", "TASKWORDS_LEXICON")


@pytest.mark.requires_data
@pytest.mark.slow
def test_criterion_4_full_scale():
    if not all(os.environ.get(v) for v in DATA_VARS):
        line = "criterion 4: SKIP  full-scale reproduction  [needs " + ", ".join(DATA_VARS) + "]"
        ACCEPTANCE_LINES.append(line)
        pytest.skip("set " + ", ".join(DATA_VARS))
    dataset = os.environ.get("TASKWORDS_DATASET", "MR").upper()
    target = TABLE2[dataset]
    corpus = load_labeled_corpus(os.environ["TASKWORDS_CORPUS"])
    lexicon = load_lexicon(os.environ["TASKWORDS_LEXICON"])
    vocab = {w for t in corpus for w in t.tokens}
    table = load_embeddings(os.environ["TASKWORDS_EMBEDDINGS"],
                            os.environ.get("TASKWORDS_EMBEDDINGS_FORMAT", "binary"), 0, vocab)
    config = ModelConfig(m=100, h=1, d=table.dim, classes=corpus.classes, seed=0)
    reports = run_crossval(corpus, table, lexicon, METHODS, config, ks=(1,), folds=10, seed=0)
    by = {r.method: r for r in reports}
    checks = []
    for m, want in target["acc"].items():
        got = 100 * by[m].classification_accuracy
        checks.append((abs(got - want) <= 4, f"{m} accuracy {got:.2f} vs {want} (+-4)"))
    got_sv = 100 * by["SV-AVG"].accuracy_at_k
    want_sv = target["top1"]["SV-AVG"]
    checks.append((abs(got_sv - want_sv) <= 6, f"SV-AVG Top-1 {got_sv:.2f} vs {want_sv} (+-6)"))
    want_order = sorted(METHODS, key=lambda m: -target["top1"][m])
    got_order = sorted(METHODS, key=lambda m: -by[m].accuracy_at_k)
    checks.append((got_order == want_order, f"Top-1 order {got_order}"))
    record(4, f"full-scale reproduction ({dataset})", checks)


def test_criterion_5_metric_self_consistency():
    rnd = random.Random(99)
    lexicon = Lexicon(METRIC_LEXICON)
    mismatches = 0
    for case in range(50):
        cases = random_metric_case(rnd)
        texts = [TokenizedText(t, lab, f"{case}-{i}") for i, (t, _, lab) in enumerate(cases)]
        sels = [RankedSelection(tuple(RankedItem(w, j, -j) for j, w in enumerate(r)), len(r),
                                f"{case}-{i}", lab) for i, (_, r, lab) in enumerate(cases)]
        k = rnd.randint(1, 5)
        acc, p, r = recount_metrics(cases, METRIC_LEXICON, k)
        got = (accuracy_at_k(sels, lexicon, k),) + precision_recall_f1(sels, texts, lexicon, k)
        if got != (acc, p, r, f1_score(p, r)):
            mismatches += 1

    corpus, lex = generate_synthetic(SynthSpec(texts_per_class=40, seed=8))
    table = EmbeddingTable(12, oov_seed=3)
    cfg = ModelConfig(m=6, h=1, d=12, classes=corpus.classes, epochs=3)
    reports = run_crossval(corpus, table, lex, METHODS, cfg, ks=(1, 3, 5), folds=5)
    rows = [(f.precision, f.recall, f.f1) for rep in reports for f in rep.folds]
    rows += [(rep.precision, rep.recall, rep.f1) for rep in reports]
    bad_rows = sum(abs(f - (2 * p * r / (p + r) if p + r > 0 else 0.0)) > 1e-15 for p, r, f in rows)
    csv_rows, bad_csv = 0, 0
    values = {}
    for line in reports_to_csv(reports).splitlines()[1:]:
        method, fold, k, metric, value = line.split(",")
        values.setdefault((method, fold, k), {})[metric] = value
    for v in values.values():
        p, r, f = float(v["precision"]), float(v["recall"]), float(v["f1"])
        csv_rows += 1
        bad_csv += abs(f - f1_score(p, r)) > 2e-6  # 6-decimal rounding of the inputs
    record(5, "metric self-consistency", [
        (mismatches == 0, f"{50 - mismatches}/50 random cases match the recount exactly"),
        (bad_rows == 0, f"F1 identity on {len(rows)} report rows"),
        (bad_csv == 0, f"F1 identity on {csv_rows} CSV rows"),
    ])


def test_criterion_6_determinism(tmp_path):
    corpus, lexicon = tmp_path / "c.tsv", tmp_path / "l.txt"
    assert main(["synth", "--corpus", str(corpus), "--lexicon", str(lexicon),
                 "--texts-per-class", "60", "--seed", "5"]) == 0
    outputs = []
    for run in range(2):
        csv = tmp_path / f"run{run}.csv"
        rc = main(["compare", "--corpus", str(corpus), "--lexicon", str(lexicon),
                   "--random-embeddings", "--d", "16", "--m", "8", "--epochs", "3",
                   "--folds", "5", "--k", "1", "--k", "3", "--seed", "11",
                   "--out", str(tmp_path / f"table{run}.txt"), "--csv", str(csv)])
        assert rc == 0
        outputs.append(csv.read_bytes())
    record(6, "determinism", [
        (outputs[0] == outputs[1], f"two compare runs give identical CSVs ({len(outputs[0])} bytes)"),
    ])


def test_criterion_7_persistence(tmp_path):
    config = ModelConfig(m=7, h=2, d=5, classes=("a", "b", "c"), pooling="avg",
                         nonlinearity="tanh", seed=13)
    model = init_model(config)
    path = tmp_path / "model.bin"
    save_model(model, path)
    loaded = load_model(path)
    table = EmbeddingTable(5, oov_seed=4)
    rng = np.random.default_rng(21)
    identical = 0
    for i in range(20):
        tokens = [f"t{int(j)}" for j in rng.integers(0, 50, rng.integers(2, 12))]
        X = text_matrix(table, tokens)
        a, b = forward(model, X), forward(loaded, X)
        identical += all(np.array_equal(getattr(a, f), getattr(b, f))
                         for f in ("feature_vectors", "representation", "logits", "probabilities"))
    record(7, "persistence", [
        (loaded.config == config, "config round-trips"),
        (identical == 20, f"{identical}/20 texts give bitwise-identical forward outputs"),
    ])


def test_criterion_8_pooling_property():
    rng = np.random.default_rng(8)
    violations = equal_nonconstant = constant_unequal = constants = 0
    for i in range(1000):
        n = int(rng.integers(1, 40))
        v = np.full(n, rng.normal()) if i % 10 == 0 else rng.normal(size=n) * rng.uniform(0.01, 100)
        if i % 10 == 5:
            v = np.maximum(v, 0.0)  # relu-shaped, often with many zeros
        mx, _ = pool_max(v)
        av = pool_avg(v)
        constant = bool(np.all(v == v[0]))
        constants += constant
        violations += mx < av
        equal_nonconstant += (mx == av) and not constant
        constant_unequal += constant and mx != av
    record(8, "pooling property", [
        (violations == 0, "pool_max >= pool_avg on all 1000 vectors"),
        (equal_nonconstant == 0, "equality never on non-constant vectors"),
        (constant_unequal == 0, f"equality on all {constants} constant vectors"),
    ])
