"""Command-line driver: gen-corpus, build-dicts, train, predict, evaluate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import model as lm
from .alignment import build_alignment_sets, load_pairs, write_pairs
from .corpus import (GCR_TAGS, Corpus, LabeledSentence, ScriptConversionTable, apply_scenario,
                     load_tag_set, load_tsv, to_simplified, write_tsv)
from .errors import (ConfigurationError, DataFormatError, DialectIDError, InsufficientDataError,
                     InvariantError, MissingResourceError)
from .evaluation import ABLATION_ROWS, compare, cross_validate, render_report
from .features import (DialectWordSets, FeatureConfig, Resources, TraditionalCharLexicon, build_pmi_sets,
                       extract_many, fit_space)
from .segmentation import FMMSegmenter, Lexicon, WhitespaceSegmenter
from .synth import GeneratorSettings, generate

log = logging.getLogger("gcrdialect")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(ConfigurationError):
    pass


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _writable(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.parent.exists() and str(p.parent) not in ("", "."):
        raise UsageError(f"directory for {what} does not exist: {p.parent}")
    return p


# ------------------------------------------------------------------ shared flags

def _tags_flags(p):
    p.add_argument("--tags", metavar="FILE",
                   help="tag-set definition file, one 'id<TAB>display name' per line "
                        "(default: MC, HK, TW, MAC, MAL, SGP)")


def _seed_flag(p):
    p.add_argument("--seed", type=int, default=0, help="random seed for shuffling and splits (default: 0)")


def _segmenter_flags(p):
    p.add_argument("--lexicon", metavar="FILE",
                   help="word list for forward-maximum-matching segmentation (default: empty, one token per character)")
    p.add_argument("--pre-segmented", action="store_true",
                   help="texts are already segmented with single spaces between tokens")


def _script_flags(p):
    p.add_argument("--traditional-lexicon", metavar="FILE",
                   help="traditional-character list for the script-form feature (default: bundled list)")
    p.add_argument("--conversion-table", metavar="FILE",
                   help="traditional<TAB>simplified table used by --convert-script (default: bundled table)")
    p.add_argument("--convert-script", action="store_true",
                   help="convert every sentence to simplified script before feature extraction")


def _train_flags(p):
    p.add_argument("-C", "--regularization", type=float, default=1.0,
                   help="regularization trade-off C of the linear SVM (default: 1.0)")
    p.add_argument("--epochs", type=int, default=50, help="maximum passes over the training data (default: 50)")
    p.add_argument("--tolerance", type=float, default=1e-3,
                   help="stop once the largest dual gradient violation in a pass falls below this (default: 1e-3)")
    p.add_argument("--binary", action="store_true", help="use binary instead of count-valued n-gram features")


def _features_flag(p, default="c2", append=False):
    families = ", ".join(["c1", "c2", "c3", "w1", "form", "pmi", "align"])
    kwargs = dict(action="append") if append else dict(default=default)
    p.add_argument("--features", metavar="SPEC", **kwargs,
                   help=f"feature families joined by '+', chosen from {families}"
                        + ("; repeat for several configurations" if append else f" (default: {default})"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcr-dialect", description="Sentence-level dialect identification for Chinese varieties.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("gen-corpus", help="write a synthetic planted-marker corpus",
                       description="Generate a deterministic planted-marker corpus (TSV).")
    _tags_flags(p)
    _seed_flag(p)
    p.add_argument("--out", required=True, metavar="FILE", help="output corpus TSV")
    p.add_argument("--num-tags", type=int, default=None, help="use the first N tags of the tag set (default: all)")
    p.add_argument("--per-class", type=int, default=300, help="sentences per tag (default: 300)")
    p.add_argument("--markers", type=int, default=80, help="marker words per tag (default: 80)")
    p.add_argument("--ambiguity", type=float, default=0.02,
                   help="probability that a marker slot borrows another tag's marker (default: 0.02)")
    p.add_argument("--markers-per-sentence", type=int, default=3, help="markers planted per sentence (default: 3)")
    p.add_argument("--min-words", type=int, default=15, help="minimum words per sentence (default: 15)")
    p.add_argument("--max-words", type=int, default=22, help="maximum words per sentence (default: 22)")
    p.add_argument("--shared-words", type=int, default=300, help="size of the vocabulary shared by all tags (default: 300)")
    p.add_argument("--bigram-markers", action="store_true",
                   help="markers are two-character words whose characters every tag shares")
    p.add_argument("--scripted", nargs="?", const="HK,TW,MAC", default=None, metavar="IDS",
                   help="render these tags in traditional script (default when given bare: HK,TW,MAC)")
    p.add_argument("--lexicon-out", metavar="FILE", help="also write the generated word list")
    p.add_argument("--pairs-out", metavar="FILE", help="also write pre-segmented parallel pairs")
    p.add_argument("--pairs-per-tag", type=int, default=200, help="parallel pairs per non-pivot tag (default: 200)")
    p.add_argument("--pivot", default="MC", help="pivot tag for parallel pairs (default: MC)")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("build-dicts", help="build PMI and/or alignment word-set files",
                       description="Build dialect word sets from a labeled corpus (PMI) and/or parallel pairs (alignment).")
    _tags_flags(p)
    _segmenter_flags(p)
    p.add_argument("--pmi", metavar="CORPUS", help="labeled training corpus TSV for PMI word sets")
    p.add_argument("--align", metavar="PAIRS", help="parallel pair file for alignment word sets")
    p.add_argument("--top-k", type=int, default=2000, help="words kept per dialect by PMI (default: 2000)")
    p.add_argument("--min-count", type=int, default=5, help="minimum corpus frequency for PMI candidates (default: 5)")
    p.add_argument("--pivot", default="MC", help="pivot dialect of the parallel pairs (default: MC)")
    p.add_argument("--min-pair-count", type=int, default=1,
                   help="keep divergent pairs seen at least this often (default: 1)")
    p.add_argument("--raw-script", action="store_true", help="do not convert pairs to simplified script before LCS")
    p.add_argument("--conversion-table", metavar="FILE", help="traditional<TAB>simplified table (default: bundled)")
    p.add_argument("--pmi-out", default="pmi_sets.tsv", metavar="FILE", help="PMI word-set output (default: pmi_sets.tsv)")
    p.add_argument("--align-out", default="align_sets.tsv", metavar="FILE",
                   help="alignment word-set output (default: align_sets.tsv)")
    p.set_defaults(func=cmd_build_dicts)

    p = sub.add_parser("train", help="train a model on a labeled corpus",
                       description="Fit the feature space and a one-vs-rest linear SVM, then save the model.")
    p.add_argument("corpus", help="labeled corpus TSV")
    p.add_argument("--model", required=True, metavar="FILE", help="output model file")
    _tags_flags(p)
    _seed_flag(p)
    _features_flag(p)
    _segmenter_flags(p)
    _script_flags(p)
    _train_flags(p)
    p.add_argument("--pmi-sets", metavar="FILE", help="PMI word-set file (needed by the pmi family)")
    p.add_argument("--align-sets", metavar="FILE", help="alignment word-set file (needed by the align family)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label sentences with a trained model",
                       description="Predict one tag per input line, printed as 'tag<TAB>sentence'.")
    p.add_argument("input", nargs="?", default="-", help="one sentence per line, or '-' for stdin (default)")
    p.add_argument("--model", required=True, metavar="FILE", help="model file written by train")
    _tags_flags(p)
    _segmenter_flags(p)
    _script_flags(p)
    p.add_argument("--pmi-sets", metavar="FILE", help="PMI word-set file used at training time")
    p.add_argument("--align-sets", metavar="FILE", help="alignment word-set file used at training time")
    p.add_argument("--scores", action="store_true", help="append the per-tag decision values to each line")
    p.add_argument("--score-mode", action="store_true",
                   help="input is a labeled TSV; report accuracy on stderr")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validate one or more feature configurations",
                       description="Stratified k-fold evaluation with per-class accuracy, confusion matrix and t-tests.")
    p.add_argument("corpus", help="labeled corpus TSV")
    _tags_flags(p)
    _seed_flag(p)
    _features_flag(p, append=True)
    _segmenter_flags(p)
    _script_flags(p)
    _train_flags(p)
    p.add_argument("--ablation", action="store_true", help="run every row of the built-in feature ablation table")
    p.add_argument("--scenario", choices=("6way", "3way", "2way"), default="6way",
                   help="tag selection: 6way, 3way (MC/TW/SGP) or 2way (simplified vs traditional groups)")
    p.add_argument("--wiki", action="store_true", help="use the Wikipedia scenario variants (3way MC/HK/TW, 2way MC vs HK+TW)")
    p.add_argument("--k", type=int, default=5, help="number of cross-validation folds (default: 5)")
    p.add_argument("--pairs", metavar="FILE", help="parallel pair file for the align family")
    p.add_argument("--pivot", default="MC", help="pivot dialect of the parallel pairs (default: MC)")
    p.add_argument("--min-pair-count", type=int, default=1, help="alignment noise threshold (default: 1)")
    p.add_argument("--top-k", type=int, default=2000, help="PMI words kept per dialect (default: 2000)")
    p.add_argument("--min-count", type=int, default=5, help="PMI corpus-frequency floor (default: 5)")
    p.add_argument("--baseline", default=None, metavar="NAME",
                   help="configuration every other one is tested against (default: first configuration)")
    p.add_argument("--significance", choices=("fold", "sentence"), default="fold",
                   help="pair per-fold accuracies (t-test) or per-sentence outcomes (McNemar)")
    p.add_argument("--format", choices=("text", "tsv", "jsonl"), default="text", help="report format (default: text)")
    p.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    p.add_argument("--plot-dir", metavar="DIR", help="also render accuracy and confusion figures (PNG) into DIR")
    p.set_defaults(func=cmd_evaluate)
    return parser


# ------------------------------------------------------------------ helpers

def _tag_set(args):
    return load_tag_set(_existing(args.tags, "tag-set file")) if args.tags else GCR_TAGS


def _segmenter(args):
    if getattr(args, "pre_segmented", False):
        return WhitespaceSegmenter()
    if getattr(args, "lexicon", None):
        return FMMSegmenter(Lexicon.load(_existing(args.lexicon, "lexicon")))
    return FMMSegmenter()


def _conversion(args):
    path = _existing(getattr(args, "conversion_table", None), "conversion table")
    return ScriptConversionTable.load(path) if path else ScriptConversionTable.default()


def _traditional(args):
    path = _existing(getattr(args, "traditional_lexicon", None), "traditional lexicon")
    return TraditionalCharLexicon.load(path) if path else TraditionalCharLexicon.default()


def _settings(args):
    return lm.TrainSettings(regularization_c=args.regularization, epochs=args.epochs,
                            seed=getattr(args, "seed", 0), tolerance=args.tolerance)


def _resources(args, config, tag_set):
    res = Resources(segmenter=_segmenter(args), traditional=_traditional(args))
    if config.pmi:
        if not args.pmi_sets:
            raise MissingResourceError("missing resource: --pmi-sets is required by the pmi family")
        res.pmi_sets = DialectWordSets.load(_existing(args.pmi_sets, "PMI word-set file"), tag_set)
    if config.alignment:
        if not args.align_sets:
            raise MissingResourceError("missing resource: --align-sets is required by the align family")
        res.align_sets = DialectWordSets.load(_existing(args.align_sets, "alignment word-set file"), tag_set)
    return res


def _fmt_score(x: float) -> str:
    return format(float(x), ".6g")


# ------------------------------------------------------------------ commands

def cmd_gen_corpus(args) -> int:
    out = _writable(args.out, "--out")
    tags = _tag_set(args)
    if args.num_tags is not None:
        if not 2 <= args.num_tags <= len(tags):
            raise UsageError(f"--num-tags must lie between 2 and {len(tags)}")
        tags = tags[:args.num_tags]
    scripted = ()
    if args.scripted:
        wanted = [s.strip() for s in args.scripted.split(",") if s.strip()]
        ids = {t.id for t in tags}
        scripted = tuple(s for s in wanted if s in ids)
        if not scripted:
            raise UsageError(f"none of the scripted tags {wanted} are in the tag set")
    settings = GeneratorSettings(
        per_class=args.per_class, markers=args.markers, ambiguity=args.ambiguity,
        markers_per_sentence=args.markers_per_sentence, min_words=args.min_words, max_words=args.max_words,
        shared_words=args.shared_words, bigram_markers=args.bigram_markers, scripted=scripted,
        pairs_per_tag=args.pairs_per_tag if args.pairs_out else 0, pivot=args.pivot if args.pairs_out else None)
    data = generate(tags, settings, seed=args.seed)
    write_tsv(data.corpus, out)
    if args.lexicon_out:
        with open(_writable(args.lexicon_out, "--lexicon-out"), "w", encoding="utf-8", newline="\n") as handle:
            handle.writelines(f"{w}\n" for w in sorted(data.lexicon.entries))
    if args.pairs_out:
        write_pairs(data.pairs, _writable(args.pairs_out, "--pairs-out"))
    print(f"wrote {len(data.corpus)} sentences ({len(tags)} tags x {args.per_class}) to {out}")
    return EXIT_OK


def cmd_build_dicts(args) -> int:
    if not args.pmi and not args.align:
        raise UsageError("give --pmi CORPUS and/or --align PAIRS")
    corpus_path = _existing(args.pmi, "PMI corpus")
    pairs_path = _existing(args.align, "parallel pair file")
    tag_set = _tag_set(args)
    segmenter = _segmenter(args)
    built = []
    if corpus_path:
        corpus = load_tsv(corpus_path, tag_set).present_tags()
        sets = build_pmi_sets(corpus, segmenter, args.top_k, args.min_count)
        sets.save(_writable(args.pmi_out, "--pmi-out"))
        built.append(("PMI", args.pmi_out, sets))
    if pairs_path:
        by_id = {t.id: t for t in tag_set}
        if args.pivot not in by_id:
            raise UsageError(f"pivot tag {args.pivot} not in tag set")
        pairs = load_pairs(pairs_path, tag_set, segmenter)
        table = None if args.raw_script else _conversion(args)
        used = {by_id[args.pivot]} | {p.target_tag for p in pairs}
        sets = build_alignment_sets(pairs, by_id[args.pivot], args.min_pair_count,
                                    tag_set=tuple(t for t in tag_set if t in used), table=table)
        sets.save(_writable(args.align_out, "--align-out"))
        built.append(("ALIGNMENT", args.align_out, sets))
    for kind, path, sets in built:
        sizes = sets.sizes()
        print(f"{kind} word sets -> {path}")
        for tag_id, size in sizes.items():
            print(f"  {tag_id}\t{size}")
        if not any(sizes.values()):
            log.warning("%s word sets are empty", kind)
    return EXIT_OK


def cmd_train(args) -> int:
    corpus_path = _existing(args.corpus, "corpus")
    model_path = _writable(args.model, "--model")
    tag_set = _tag_set(args)
    config = FeatureConfig.parse(args.features, binary=args.binary)
    res = _resources(args, config, tag_set)
    corpus = load_tsv(corpus_path, tag_set).present_tags()
    if args.convert_script:
        table = _conversion(args)
        corpus = corpus.map_text(lambda t: to_simplified(t, table))
    space = fit_space(corpus, config, res)
    vectors = extract_many(corpus.texts, config, res, space)
    model = lm.train(zip(vectors, corpus.labels), _settings(args), space=space, config=config,
                     tag_set=corpus.tag_set)
    lm.save(model, model_path)
    preds = lm.predict_many(model, vectors)
    acc = sum(p == s.tag for p, s in zip(preds, corpus.sentences)) / len(corpus)
    print(f"training accuracy\t{acc!r}")
    print(f"feature space size\t{len(space)}")
    print(f"model\t{model_path}")
    return EXIT_OK


def _read_lines(source: str):
    if source == "-":
        return [ln.rstrip("\r\n") for ln in sys.stdin]
    path = _existing(source, "input")
    with open(path, encoding="utf-8") as handle:
        return [ln.rstrip("\r\n") for ln in handle]


def cmd_predict(args) -> int:
    model_path = _existing(args.model, "model")
    tag_set = _tag_set(args)
    model = lm.load(model_path)
    known = {t.id: t for t in tag_set}
    for t in model.tag_set:
        known.setdefault(t.id, t)
    res = _resources(args, model.config, tuple(known.values()))
    table = _conversion(args) if args.convert_script else None
    if args.score_mode:
        corpus = load_tsv(_existing(args.input, "input") if args.input != "-" else "/dev/stdin",
                          tuple(known.values()))
        sentences = list(corpus.sentences)
    else:
        sentences = [LabeledSentence(ln, model.tag_set[0]) for ln in _read_lines(args.input) if ln.strip()]
    texts = [s.text for s in sentences]
    if table is not None:
        texts = [to_simplified(t, table) for t in texts]
    vectors = extract_many(texts, model.config, res, model.space)
    scores = lm.decision_matrix(model, vectors) if vectors else []
    correct = 0
    out = sys.stdout
    for s, row in zip(sentences, scores):
        pred = model.tag_set[int(row.argmax())]
        line = f"{pred.id}\t{s.text}"
        if args.scores:
            line += "\t" + "\t".join(f"{t.id}={_fmt_score(v)}" for t, v in zip(model.tag_set, row))
        out.write(line + "\n")
        correct += pred == s.tag
    if args.score_mode:
        acc = correct / len(sentences) if sentences else 0.0
        print(f"accuracy\t{acc!r}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    corpus_path = _existing(args.corpus, "corpus")
    out_path = _writable(args.out, "--out")
    pairs_path = _existing(args.pairs, "parallel pair file")
    tag_set = _tag_set(args)
    if args.ablation and args.features:
        raise UsageError("--ablation and --features are mutually exclusive")
    extra = dict(pmi_top_k=args.top_k, pmi_min_count=args.min_count, binary=args.binary)
    if args.ablation:
        rows = [(name, FeatureConfig.parse(spec, **extra)) for name, spec in ABLATION_ROWS]
    else:
        specs = args.features or ["c2"]
        rows = [(FeatureConfig.parse(spec, **extra).name, FeatureConfig.parse(spec, **extra)) for spec in specs]
    corpus = load_tsv(corpus_path, tag_set).present_tags()
    corpus = apply_scenario(corpus, args.scenario, wiki=args.wiki)
    segmenter = _segmenter(args)
    pairs = None
    pivot = None
    if pairs_path:
        pairs = load_pairs(pairs_path, tag_set, segmenter)
        pivot = next((t for t in tag_set if t.id == args.pivot), None)
        if pivot is None:
            raise UsageError(f"pivot tag {args.pivot} not in tag set")
    if any(cfg.alignment for _, cfg in rows) and pairs is None:
        raise MissingResourceError("missing resource: --pairs is required by the align family")
    convert = _conversion(args) if args.convert_script else None
    reports = []
    for name, cfg in rows:
        log.info("evaluating %s", name)
        reports.append(cross_validate(
            corpus, cfg, _settings(args), args.k, args.seed, segmenter=segmenter, traditional=_traditional(args),
            pairs=pairs, pivot_tag=pivot, min_pair_count=args.min_pair_count, pair_table=_conversion(args),
            convert=convert, name=name))
    if len(reports) > 1:
        base_name = args.baseline or reports[0].name
        base = next((r for r in reports if r.name == base_name), None)
        if base is None:
            raise UsageError(f"baseline {base_name!r} is not among the evaluated configurations")
        for r in reports:
            if r is not base:
                compare(r, base, mode=args.significance)
    text = render_report(reports, args.format)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    if args.plot_dir:
        from .plots import save_report_figures
        for path in save_report_figures(reports, args.plot_dir):
            log.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, InsufficientDataError, UnicodeDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DialectIDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
