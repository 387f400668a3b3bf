"""Command-line entry point: ``taskwords {train,extract,evaluate,compare,synth}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .baselines import SoftmaxConfig
from .corpus import (default_stopwords, load_labeled_corpus, load_lexicon, load_unlabeled_texts,
                     save_corpus, save_lexicon)
from .embeddings import EmbeddingTable, load_embeddings, save_embeddings
from .evaluation import (METHODS, EvalOptions, SynthSpec, frequency_table, generate_synthetic,
                         reports_to_csv, reports_to_table, run_crossval)
from .model import ModelConfig, accuracy, load_model, save_model, train
from .scoring import extract_corpus, format_record, highlight

logger = logging.getLogger("taskwords")

COMMANDS = ("train", "extract", "evaluate", "compare", "synth")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--corpus", help="labeled corpus, one 'label<TAB>text' per line")
    g.add_argument("--embeddings", help="pretrained word vectors (word2vec layout)")
    g.add_argument("--embeddings-format", choices=("text", "binary"), default="text")
    g.add_argument("--random-embeddings", action="store_true",
                   help="no pretrained file: every word gets a seeded random vector of size --d")
    g.add_argument("--oov-seed", type=int, default=0,
                   help="seed for random vectors of unknown words (default 0)")
    g.add_argument("--stopwords", default="auto",
                   help="'auto' (bundled list only when h >= 2), 'off', 'default', or a file path")
    g.add_argument("--min-length", type=int, default=1,
                   help="drop texts with fewer tokens after tokenization (default 1)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file (default: stdout)")
    g.add_argument("--timestamps", action="store_true", help="timestamp log lines")
    g.add_argument("-v", "--verbose", action="store_true")
    g.add_argument("--config", help="key=value file whose entries act as flags")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group(
        "model", "m=100 and d=300 are the reference setup; other defaults are local choices")
    g.add_argument("--m", type=int, default=100, help="number of filters (default 100)")
    g.add_argument("--h", type=int, default=1, help="filter width in words; >=2 for phrases")
    g.add_argument("--d", type=int, default=300,
                   help="embedding size for --random-embeddings (default 300)")
    g.add_argument("--pooling", choices=("max", "avg"), default="max")
    g.add_argument("--nonlinearity", choices=("relu", "tanh", "identity"), default="relu",
                   help="default relu (local choice)")
    g.add_argument("--lr", type=float, default=0.05, help="SGD learning rate (default 0.05, local choice)")
    g.add_argument("--epochs", type=int, default=25, help="training epochs (default 25, local choice)")
    g.add_argument("--l2", type=float, default=0.0, help="weight decay (default 0)")
    g.add_argument("--finetune", action="store_true", help="also update word vectors")


def _eval_flags(p: argparse.ArgumentParser, methods_default: str) -> None:
    g = p.add_argument_group("evaluation")
    g.add_argument("--lexicon", help="ground-truth words, 'word[<TAB>class]' per line")
    g.add_argument("--methods", default=methods_default,
                   help=f"comma-separated subset of {','.join(METHODS)}")
    g.add_argument("--folds", type=int, default=10)
    g.add_argument("--max-folds", type=int, help="run only the first N folds")
    g.add_argument("--k", type=int, action="append", help="Top-k cutoff (repeatable; default 1 3 5)")
    g.add_argument("--dedupe", choices=("on", "off"), default="on")
    g.add_argument("--saliency-norm", choices=("linf", "l2"), default="linf")
    g.add_argument("--accuracy-denominator", choices=("min", "k"), default="min")
    g.add_argument("--average", choices=("micro", "macro"), default="micro")
    g.add_argument("--only-with-truth", action="store_true",
                   help="average accuracy@k only over texts containing a lexicon word")
    g.add_argument("--softmax-lr", type=float, default=1.0)
    g.add_argument("--softmax-epochs", type=int, default=25)
    g.add_argument("--csv", help="also write long-format CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskwords",
        description="Identify task-specific words and phrases with CNN score vectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a CNN classifier and save it")
    _common(p)
    _model_flags(p)
    p.add_argument("--model", help="where to write the model file")
    p.add_argument("--save-embeddings", help="with --finetune: where to write tuned vectors")

    p = sub.add_parser("extract", help="Top-k words/phrases per text from a trained model")
    _common(p)
    p.add_argument("--model", help="trained model file")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--class-source", choices=("gold", "predicted"), default="gold")
    p.add_argument("--dedupe", choices=("on", "off", "auto"), default="auto",
                   help="auto: on for words, off for phrases and highlights")
    p.add_argument("--unlabeled", action="store_true", help="input lines are raw texts")
    p.add_argument("--highlight", action="store_true",
                   help="print each text with selected items marked [word]^rank")
    p.add_argument("--frequency", type=int, metavar="N",
                   help="instead of records, print the N most frequent selected items per class")

    for name, default, help_ in (
            ("evaluate", "SV-AVG", "cross-validate one method against a lexicon"),
            ("compare", ",".join(METHODS), "cross-validate all six methods")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _model_flags(p)
        _eval_flags(p, default)

    p = sub.add_parser("synth", help="write a planted-keyword corpus and its lexicon")
    p.add_argument("--corpus", required=True, help="output corpus path")
    p.add_argument("--lexicon", required=True, help="output lexicon path")
    p.add_argument("--keyword", action="append", metavar="CLASS=WORD[,WORD]",
                   help="planted keywords per class (default neg=bad, pos=good)")
    p.add_argument("--background", type=int, default=200)
    p.add_argument("--texts-per-class", type=int, default=1000)
    p.add_argument("--min-len", type=int, default=8)
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05,
                   help="probability that a text has no keyword")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timestamps", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--config")
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Splice ``--config`` file entries in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    extra = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if flag == "--k":
            if "--k" not in rest:
                for v in value.replace(",", " ").split():
                    extra += ["--k", v]
        elif value.lower() in ("true", "yes", "on") and key not in ("dedupe",):
            extra.append(flag)
        elif value.lower() in ("false", "no") and key not in ("dedupe",):
            continue
        else:
            extra += [flag, value]
    # flags belong after the subcommand
    cmd = next((j for j, a in enumerate(rest) if a in COMMANDS), None)
    if cmd is None:
        return rest + extra
    return rest[:cmd + 1] + extra + rest[cmd + 1:]


def _setup_logging(args) -> None:
    fmt = "%(asctime)s %(levelname)s %(message)s" if args.timestamps else "%(levelname)s %(message)s"
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(fmt))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)


def _stopwords(args, h: int):
    mode = args.stopwords
    if mode == "off" or (mode == "auto" and h < 2):
        return None
    if mode in ("auto", "default"):
        return default_stopwords()
    return frozenset(w.strip().lower() for w in Path(mode).read_text("utf-8").split())


def _table(args, vocab=None) -> EmbeddingTable:
    if args.embeddings:
        return load_embeddings(args.embeddings, args.embeddings_format, args.oov_seed, vocab)
    if args.random_embeddings:
        return EmbeddingTable(args.d, oov_seed=args.oov_seed)
    raise ValueError("--embeddings is required (or pass --random-embeddings)")


def _vocab(corpus) -> set[str]:
    return {w for t in corpus for w in t.tokens}


def _require(args, *names) -> None:
    missing = [n for n in names if not getattr(args, n)]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join("--" + n.replace("_", "-")
                                                                    for n in missing))


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", encoding="utf-8") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()


def _model_config(args, corpus, d: int) -> ModelConfig:
    return ModelConfig(m=args.m, h=args.h, d=d, classes=corpus.classes, pooling=args.pooling,
                       nonlinearity=args.nonlinearity, lr=args.lr, epochs=args.epochs,
                       seed=args.seed, l2=args.l2, finetune=args.finetune)


def cmd_train(args) -> int:
    _require(args, "corpus", "model")
    if args.finetune and not args.save_embeddings:
        raise ValueError("--finetune needs --save-embeddings so the tuned vectors are kept")
    corpus = load_labeled_corpus(args.corpus, _stopwords(args, args.h), args.min_length)
    table = _table(args, _vocab(corpus))
    config = _model_config(args, corpus, table.dim)
    logger.info("config %s", asdict(config))
    logger.info("corpus %s: %d texts, classes %s", args.corpus, len(corpus), list(corpus.classes))
    model = train(corpus, table, config)
    save_model(model, args.model)
    logger.info("training accuracy %.4f; model written to %s",
                accuracy(model, table, corpus), args.model)
    if args.finetune:
        save_embeddings(table, args.save_embeddings, args.embeddings_format)
    return 0


def cmd_extract(args) -> int:
    _require(args, "corpus", "model")
    model = load_model(args.model)
    h = model.config.h
    stop = _stopwords(args, h)
    if args.unlabeled:
        corpus = load_unlabeled_texts(args.corpus, model.classes, stop, args.min_length)
    else:
        corpus = load_labeled_corpus(args.corpus, stop, args.min_length, classes=model.classes)
    if not args.embeddings and args.random_embeddings:
        args.d = model.config.d
    table = _table(args, _vocab(corpus))
    dedupe = {"on": True, "off": False, "auto": None}[args.dedupe]
    if args.highlight and dedupe is None:
        dedupe = False
    if args.k < 1:
        raise ValueError("--k must be at least 1")
    extractions = extract_corpus(model, table, corpus, args.class_source, args.k, dedupe)
    with _Output(args.out) as out:
        if args.frequency:
            table_ = frequency_table((e.selection for e in extractions), args.frequency)
            for label, rows in table_.items():
                out.write(f"{label}\t" + ", ".join(f"{w} ({c})" for w, c in rows) + "\n")
            return 0
        for ext in extractions:
            if args.highlight:
                out.write(f"{ext.text.id}\t{ext.label}\t{highlight(ext.text, ext.selection, h)}\n")
            else:
                out.write(format_record(ext) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "corpus", "lexicon")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.command == "evaluate" and len(methods) != 1:
        raise ValueError("evaluate runs exactly one method; use compare for several")
    ks = args.k or [1, 3, 5]
    if any(k < 1 for k in ks):
        raise ValueError("--k values must be at least 1")
    corpus = load_labeled_corpus(args.corpus, _stopwords(args, args.h), args.min_length)
    lexicon = load_lexicon(args.lexicon)
    table = _table(args, _vocab(corpus))
    config = _model_config(args, corpus, table.dim)
    opts = EvalOptions(dedupe=args.dedupe == "on", saliency_norm=args.saliency_norm,
                       denominator=args.accuracy_denominator, average=args.average,
                       only_with_truth=args.only_with_truth)
    reports = run_crossval(corpus, table, lexicon, methods, config,
                           SoftmaxConfig(args.softmax_lr, args.softmax_epochs, args.seed, 0.0),
                           ks, args.folds, args.seed, args.max_folds, opts)
    with _Output(args.out) as out:
        out.write(reports_to_table(reports))
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports), encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    keywords = {}
    for spec in args.keyword or ["neg=bad", "pos=good"]:
        if "=" not in spec:
            raise ValueError(f"bad --keyword {spec!r}; expected CLASS=WORD[,WORD]")
        label, words = spec.split("=", 1)
        keywords[label.strip()] = tuple(w.strip().lower() for w in words.split(",") if w.strip())
    spec = SynthSpec(keywords, args.background, args.min_len, args.max_len,
                     args.texts_per_class, args.noise, args.seed)
    corpus, lexicon = generate_synthetic(spec)
    save_corpus(corpus, args.corpus)
    save_lexicon(lexicon, args.lexicon)
    logger.info("wrote %d texts to %s and %d keywords to %s",
                len(corpus), args.corpus, len(lexicon), args.lexicon)
    return 0


HANDLERS = {"train": cmd_train, "extract": cmd_extract, "evaluate": cmd_evaluate,
            "compare": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        return HANDLERS[args.command](args)
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (OSError, ValueError, KeyError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
