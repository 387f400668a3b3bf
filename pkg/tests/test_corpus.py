import pytest
from hypothesis import given, strategies as st

from taskwords.corpus import (WILDCARD, Corpus, TokenizedText, default_stopwords, kfold_split,
                              load_labeled_corpus, load_lexicon, save_corpus, tokenize)


@pytest.mark.parametrize("raw, stop, expected", [
    ("Do you need PROOF?", None, ["do", "you", "need", "proof"]),
    ("@user #racism is bad .", None, ["racism", "is", "bad"]),
    ("the end", {"the"}, ["end"]),
    ("can't stop!!", None, ["can't", "stop"]),
    ("(@someone) hi", None, ["hi"]),
    ("   \t\n ", None, []),
])
def test_tokenize(raw, stop, expected):
    assert tokenize(raw, stop) == expected


@given(st.text())
def test_tokenize_idempotent(raw):
    once = tokenize(raw)
    assert tokenize(" ".join(once)) == once
    assert all(t and not t.startswith("@") for t in once)


def test_default_stopwords_keep_negations():
    stop = default_stopwords()
    assert {"the", "a", "of"} <= stop
    assert not {"not", "no", "too"} & stop


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_labeled_corpus(tmp_path):
    p = _write(tmp_path, "c.tsv", "pos\tgood fun movie\nneg\tdull mess\n")
    c = load_labeled_corpus(p)
    assert len(c) == 2
    assert set(c.classes) == {"pos", "neg"}
    assert c.texts[0].tokens == ("good", "fun", "movie")


def test_load_corpus_hashtag_line_and_skips(tmp_path):
    p = _write(tmp_path, "c.tsv", "# comment\npos\t@u #x\nneg\t@only\n\nneg\tok then\n")
    c = load_labeled_corpus(p)
    assert [t.tokens for t in c] == [("x",), ("ok", "then")]
    assert c.skipped == 1


def test_load_corpus_errors(tmp_path):
    with pytest.raises(ValueError, match="no texts"):
        load_labeled_corpus(_write(tmp_path, "e.tsv", ""))
    with pytest.raises(ValueError, match=":2"):
        load_labeled_corpus(_write(tmp_path, "m.tsv", "pos\tfine\nno tab here\n"))
    with pytest.raises(FileNotFoundError):
        load_labeled_corpus(tmp_path / "missing.tsv")


def test_min_length(tmp_path):
    p = _write(tmp_path, "c.tsv", "pos\ta b c\nneg\td e\npos\tf g h i\n")
    c = load_labeled_corpus(p, min_length=3, classes=("neg", "pos"))
    assert len(c) == 2 and c.skipped == 1


def test_corpus_round_trip(tmp_path):
    p = _write(tmp_path, "c.tsv", "pos\tGreat, fun!\nneg\t#Dull @x mess\nneg\tmeh\n")
    c = load_labeled_corpus(p)
    out = tmp_path / "out.tsv"
    save_corpus(c, out)
    c2 = load_labeled_corpus(out)
    assert [(t.tokens, t.label) for t in c] == [(t.tokens, t.label) for t in c2]


def test_corpus_invariants():
    t = TokenizedText(["a"], "pos", "1")
    with pytest.raises(ValueError):
        Corpus((t,), ("pos",))
    with pytest.raises(ValueError):
        Corpus((t,), ("x", "y"))
    with pytest.raises(ValueError):
        TokenizedText([], "pos", "2")


def test_load_lexicon(tmp_path):
    lex = load_lexicon(_write(tmp_path, "l.tsv", "Good\tpos\nbad\tneg\ngood\tneg\nsavages\n"))
    assert lex.entries == {"good": "neg", "bad": "neg", "savages": WILDCARD}
    assert lex.matches("savages", "pos") and lex.matches("savages", "neg")
    assert lex.matches("good", "neg") and not lex.matches("good", "pos")
    with pytest.raises(FileNotFoundError):
        load_lexicon(tmp_path / "nope")


def _corpus(n):
    texts = [TokenizedText(["w"], "a" if i % 2 else "b", str(i)) for i in range(n)]
    return Corpus(texts, ("a", "b"))


@pytest.mark.parametrize("n, sizes", [(100, [10] * 10), (101, [11] + [10] * 9)])
def test_kfold_sizes(n, sizes):
    plan = kfold_split(_corpus(n), 10, seed=4)
    assert sorted(plan.sizes(), reverse=True) == sizes


@given(st.integers(2, 60), st.integers(2, 10), st.integers(0, 2**31))
def test_kfold_partition(n, k, seed):
    if k > n:
        with pytest.raises(ValueError):
            kfold_split(_corpus(n), k, seed)
        return
    plan = kfold_split(_corpus(n), k, seed)
    assert max(plan.sizes()) - min(plan.sizes()) <= 1
    tests = [i for f in range(k) for i in plan.test_indices(f)]
    assert sorted(tests) == list(range(n))
    assert plan == kfold_split(_corpus(n), k, seed)
    for f in range(k):
        assert set(plan.train_indices(f)).isdisjoint(plan.test_indices(f))


def test_kfold_k_too_small():
    with pytest.raises(ValueError):
        kfold_split(_corpus(5), 1, 0)
