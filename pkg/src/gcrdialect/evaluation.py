"""Cross-validated evaluation, significance tests and report rendering."""

from __future__ import annotations

import io
import json
import math
import unicodedata
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .alignment import ParallelPair, build_alignment_sets
from .corpus import Corpus, DialectTag, ScriptConversionTable, stratified_kfold, to_simplified
from .errors import ConfigurationError, DataFormatError, MissingResourceError
from .features import (FeatureConfig, Resources, TraditionalCharLexicon, build_pmi_sets,
                       extract_many, fit_space)
from .model import TrainSettings, predict_many, train
from .segmentation import FMMSegmenter, Segmenter, strip_whitespace

# Two-tailed critical values of Student's t, df = 1..30.
T_CRITICAL = {
    0.05: (12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
           2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
           2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042),
    0.01: (63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169,
           3.106, 3.055, 3.012, 2.977, 2.947, 2.921, 2.898, 2.878, 2.861, 2.845,
           2.831, 2.819, 2.807, 2.797, 2.787, 2.779, 2.771, 2.763, 2.756, 2.750),
}
# chi-square, one degree of freedom
CHI2_CRITICAL = {0.05: 3.841, 0.01: 6.635}


def t_critical(df: int, alpha: float) -> float:
    """Two-tailed critical value; df above 30 reuses the df=30 entry (conservative)."""
    if alpha not in T_CRITICAL:
        raise ValueError(f"alpha must be one of {sorted(T_CRITICAL)}")
    if df < 1:
        raise ValueError("df must be >= 1")
    return T_CRITICAL[alpha][min(df, 30) - 1]


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    mean_difference: float

    def significant_at(self, alpha: float) -> bool:
        return abs(self.t) > t_critical(self.df, alpha)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Paired t statistic on ``a - b`` with ``n - 1`` degrees of freedom.

    Zero-variance differences give ``t = 0`` when their mean is zero and
    ``t = +/-inf`` otherwise.
    """
    if len(a) != len(b):
        raise ValueError("samples differ in length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two paired observations")
    d = [x - y for x, y in zip(a, b)]
    mean = sum(d) / n
    var = sum((x - mean) ** 2 for x in d) / (n - 1)
    if var == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        t = mean / math.sqrt(var / n)
    return TTestResult(t, n - 1, mean)


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    only_a: int
    only_b: int

    def significant_at(self, alpha: float) -> bool:
        return self.statistic > CHI2_CRITICAL[alpha]


def mcnemar_test(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> McNemarResult:
    """Continuity-corrected McNemar test on per-sentence correctness."""
    if len(correct_a) != len(correct_b):
        raise ValueError("samples differ in length")
    only_a = sum(1 for x, y in zip(correct_a, correct_b) if x and not y)
    only_b = sum(1 for x, y in zip(correct_a, correct_b) if y and not x)
    if only_a + only_b == 0:
        return McNemarResult(0.0, 0, 0)
    stat = (abs(only_a - only_b) - 1) ** 2 / (only_a + only_b)
    return McNemarResult(stat, only_a, only_b)


@dataclass
class ConfusionMatrix:
    """Rows are true tags, columns predicted tags."""

    tag_set: tuple[DialectTag, ...]
    counts: np.ndarray = None

    def __post_init__(self):
        self.tag_set = tuple(self.tag_set)
        k = len(self.tag_set)
        if self.counts is None:
            self.counts = np.zeros((k, k), dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (k, k) or (self.counts < 0).any():
            raise ValueError("confusion counts must be a non-negative K x K matrix")

    def add(self, true: DialectTag, pred: DialectTag) -> None:
        index = {t: i for i, t in enumerate(self.tag_set)}
        self.counts[index[true], index[pred]] += 1

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class_accuracy(self) -> dict[DialectTag, float]:
        rows = self.row_sums
        return {t: (self.counts[i, i] / rows[i] if rows[i] else 0.0) for i, t in enumerate(self.tag_set)}

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, ConfusionMatrix) and self.tag_set == other.tag_set
                and np.array_equal(self.counts, other.counts))


@dataclass(frozen=True)
class Significance:
    statistic: float
    df: int
    significant: bool
    test: str = "paired-t"


@dataclass
class EvalReport:
    config: FeatureConfig
    fold_accuracies: list[float]
    confusion: ConfusionMatrix
    name: str = ""
    significance: dict[str, Significance] = field(default_factory=dict)
    # per-sentence correctness in fold order, kept for McNemar comparisons
    correct: list[bool] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if not self.name:
            self.name = self.config.name

    @property
    def tag_set(self) -> tuple[DialectTag, ...]:
        return self.confusion.tag_set

    @property
    def mean_accuracy(self) -> float:
        return sum(self.fold_accuracies) / len(self.fold_accuracies) if self.fold_accuracies else 0.0

    @property
    def pooled_accuracy(self) -> float:
        return self.confusion.accuracy()

    @property
    def per_class_accuracy(self) -> dict[DialectTag, float]:
        return self.confusion.per_class_accuracy()


FoldHook = Callable[[int, Corpus, Corpus, Resources, object, object], None]


def _pair_touches(pair: ParallelPair, texts: set[str]) -> bool:
    return strip_whitespace(pair.source_text) in texts or strip_whitespace(pair.target_text) in texts


def fold_resources(
    train_split: Corpus,
    test_split: Corpus,
    config: FeatureConfig,
    *,
    segmenter: Segmenter | None = None,
    traditional: TraditionalCharLexicon | None = None,
    pairs: Sequence[ParallelPair] | None = None,
    pivot_tag: DialectTag | None = None,
    min_pair_count: int = 1,
    pair_table: ScriptConversionTable | None = None,
) -> Resources:
    """Resources for one fold, derived from the training split only.

    Parallel pairs whose either side equals a test sentence are withheld.
    """
    res = Resources(segmenter=segmenter, traditional=traditional)
    if config.pmi:
        if segmenter is None:
            raise MissingResourceError("PMI word sets need a segmenter")
        res.pmi_sets = build_pmi_sets(train_split, segmenter, config.pmi_top_k, config.pmi_min_count)
    if config.alignment:
        if pairs is None:
            raise MissingResourceError("alignment features need parallel pairs")
        test_texts = {strip_whitespace(s.text) for s in test_split.sentences}
        if pair_table is not None:
            test_texts |= {to_simplified(t, pair_table) for t in test_texts}
        kept = [p for p in pairs if not _pair_touches(p, test_texts)]
        if pivot_tag is None:
            pivot_tag = pairs_pivot_default(train_split)
        res.align_sets = build_alignment_sets(kept, pivot_tag, min_pair_count, table=pair_table)
    res.check(config)
    return res


def pairs_pivot_default(corpus: Corpus) -> DialectTag:
    for tag in corpus.tag_set:
        if tag.id == "MC":
            return tag
    return corpus.tag_set[0]


def cross_validate(
    corpus: Corpus,
    config: FeatureConfig,
    settings: TrainSettings = TrainSettings(),
    k: int = 5,
    seed: int = 0,
    *,
    segmenter: Segmenter | None = None,
    traditional: TraditionalCharLexicon | None = None,
    pairs: Sequence[ParallelPair] | None = None,
    pivot_tag: DialectTag | None = None,
    min_pair_count: int = 1,
    pair_table: ScriptConversionTable | None = None,
    convert: ScriptConversionTable | None = None,
    name: str = "",
    on_fold: FoldHook | None = None,
) -> EvalReport:
    """Stratified k-fold evaluation of one feature configuration.

    Word sets and the feature space are rebuilt inside every fold from its
    training split. ``convert`` maps all sentences to simplified script
    before anything else happens.
    """
    corpus = corpus.present_tags()
    if convert is not None:
        corpus = corpus.map_text(lambda t: to_simplified(t, convert))
    if segmenter is None and (config.word_seg or config.pmi or config.alignment):
        segmenter = FMMSegmenter()
    confusion = ConfusionMatrix(corpus.tag_set)
    accuracies = []
    correct = []
    for f, (train_split, test_split) in enumerate(stratified_kfold(corpus, k, seed)):
        res = fold_resources(train_split, test_split, config, segmenter=segmenter, traditional=traditional,
                             pairs=pairs, pivot_tag=pivot_tag, min_pair_count=min_pair_count,
                             pair_table=pair_table)
        space = fit_space(train_split, config, res)
        train_vecs = extract_many(train_split.texts, config, res, space)
        model = train(zip(train_vecs, train_split.labels), settings, space=space, config=config,
                      tag_set=corpus.tag_set)
        preds = predict_many(model, extract_many(test_split.texts, config, res, space))
        hits = [p == s.tag for p, s in zip(preds, test_split.sentences)]
        for p, s in zip(preds, test_split.sentences):
            confusion.add(s.tag, p)
        accuracies.append(sum(hits) / len(hits))
        correct.extend(hits)
        if on_fold is not None:
            on_fold(f, train_split, test_split, res, space, model)
    return EvalReport(config, accuracies, confusion, name=name, correct=correct)


def compare(report: EvalReport, baseline: EvalReport, *, mode: str = "fold", alpha: float = 0.01,
            label: str | None = None) -> Significance:
    """Test whether ``report`` beats ``baseline`` and record the outcome on ``report``.

    ``mode="fold"`` pairs fold accuracies (t-test); ``mode="sentence"`` pairs
    per-sentence correctness (McNemar). Only improvements count as significant.
    """
    if mode == "fold":
        res = paired_t_test(report.fold_accuracies, baseline.fold_accuracies)
        sig = Significance(res.t, res.df, res.t > 0 and res.significant_at(alpha), "paired-t")
    elif mode == "sentence":
        if not report.correct or len(report.correct) != len(baseline.correct):
            raise ConfigurationError("per-sentence comparison needs reports from the same folds")
        res = mcnemar_test(report.correct, baseline.correct)
        sig = Significance(res.statistic, 1, res.only_a > res.only_b and res.significant_at(alpha), "mcnemar")
    else:
        raise ConfigurationError(f"unknown significance mode {mode!r}")
    report.significance[label or baseline.name] = sig
    return sig


# ---------------------------------------------------------------- rendering

def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def _width(text: str) -> int:
    # CJK and other wide characters take two terminal columns
    return sum(2 if unicodedata.east_asian_width(c) in "WF" else 1 for c in text)


def _pad(text: str, width: int, right: bool = False) -> str:
    fill = " " * max(0, width - _width(text))
    return fill + text if right else text + fill


def _render_text(reports: list[EvalReport]) -> str:
    out = io.StringIO()
    k = max(len(r.fold_accuracies) for r in reports)
    name_w = max(12, *(_width(r.name) for r in reports)) + 2
    out.write(f"Accuracy ({k}-fold cross-validation, %)\n")
    header = _pad("features", name_w) + "".join(_pad(f"fold{i + 1}", 9, True) for i in range(k))
    out.write(header + _pad("mean", 10, True) + "\n")
    marks = set()
    for r in reports:
        star = "*" if any(s.significant for s in r.significance.values()) else ""
        marks.update(b for b, s in r.significance.items())
        row = _pad(r.name, name_w) + "".join(_pad(_pct(a), 9, True) for a in r.fold_accuracies)
        out.write(row + _pad(_pct(r.mean_accuracy) + star, 10, True) + "\n")
    if marks:
        out.write(f"* significantly better than {', '.join(sorted(marks))} (p < 0.01)\n")
    for r in reports:
        tags = r.tag_set
        label_w = max(10, *(_width(t.display_name) for t in tags)) + 2
        out.write(f"\nPer-class accuracy: {r.name}\n")
        out.write(_pad("Dialect", label_w) + _pad("accuracy", 10, True) + "\n")
        for t, acc in r.per_class_accuracy.items():
            out.write(_pad(t.display_name, label_w) + _pad(_pct(acc), 10, True) + "\n")
        out.write(f"\nConfusion matrix: {r.name} (rows true, columns predicted)\n")
        col_w = [max(6, _width(t.display_name)) + 2 for t in tags]
        out.write(_pad("Dialect", label_w) + "".join(_pad(t.display_name, w, True) for t, w in zip(tags, col_w)) + "\n")
        for i, t in enumerate(tags):
            cells = "".join(_pad(str(c), w, True) for c, w in zip(r.confusion.counts[i], col_w))
            out.write(_pad(t.display_name, label_w) + cells + "\n")
    return out.getvalue()


def _report_dict(r: EvalReport) -> dict:
    return {
        "name": r.name,
        "config": r.config.to_dict(),
        "tags": [t.id for t in r.tag_set],
        "tag_names": [t.display_name for t in r.tag_set],
        "fold_accuracies": list(r.fold_accuracies),
        "mean_accuracy": r.mean_accuracy,
        "pooled_accuracy": r.pooled_accuracy,
        "per_class_accuracy": {t.id: a for t, a in r.per_class_accuracy.items()},
        "confusion": r.confusion.counts.tolist(),
        "significance": {b: {"statistic": s.statistic, "df": s.df, "significant": s.significant, "test": s.test}
                         for b, s in r.significance.items()},
    }


def _report_from_dict(d: dict) -> EvalReport:
    tags = tuple(DialectTag(i, n) for i, n in zip(d["tags"], d["tag_names"], strict=True))
    sig = {b: Significance(float(s["statistic"]), int(s["df"]), bool(s["significant"]), s.get("test", "paired-t"))
           for b, s in d.get("significance", {}).items()}
    return EvalReport(FeatureConfig.from_dict(d["config"]), [float(a) for a in d["fold_accuracies"]],
                      ConfusionMatrix(tags, np.array(d["confusion"], dtype=np.int64).reshape(len(tags), len(tags))),
                      name=d["name"], significance=sig)


def _render_tsv(reports: list[EvalReport]) -> str:
    out = io.StringIO()
    out.write("config\tfold\taccuracy\n")
    for r in reports:
        for i, a in enumerate(r.fold_accuracies, 1):
            out.write(f"{r.name}\t{i}\t{a!r}\n")
    out.write("# summary\nconfig\tmean_accuracy\tpooled_accuracy\tfeatures\n")
    for r in reports:
        out.write(f"{r.name}\t{r.mean_accuracy!r}\t{r.pooled_accuracy!r}\t{json.dumps(r.config.to_dict(), sort_keys=True)}\n")
    out.write("# significance\nconfig\tbaseline\ttest\tstatistic\tdf\tsignificant\n")
    for r in reports:
        for b, s in r.significance.items():
            out.write(f"{r.name}\t{b}\t{s.test}\t{s.statistic!r}\t{s.df}\t{int(s.significant)}\n")
    for r in reports:
        out.write(f"# confusion\t{r.name}\n")
        out.write("true\\pred\t" + "\t".join(t.id for t in r.tag_set) + "\n")
        out.write("#names\t" + "\t".join(t.display_name for t in r.tag_set) + "\n")
        for i, t in enumerate(r.tag_set):
            out.write(t.id + "\t" + "\t".join(str(c) for c in r.confusion.counts[i]) + "\n")
    return out.getvalue()


def _parse_tsv(text: str) -> list[EvalReport]:
    folds: dict[str, list[float]] = {}
    configs: dict[str, dict] = {}
    sigs: dict[str, dict] = {}
    confusions: dict[str, ConfusionMatrix] = {}
    section = "folds"
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line:
            continue
        cells = line.split("\t")
        if line.startswith("# summary"):
            section, i = "summary", i + 1
        elif line.startswith("# significance"):
            section, i = "significance", i + 1
        elif line.startswith("# confusion\t"):
            name = cells[1]
            ids = lines[i].split("\t")[1:]
            names = lines[i + 1].split("\t")[1:]
            tags = tuple(DialectTag(a, b) for a, b in zip(ids, names, strict=True))
            rows = [[int(c) for c in lines[i + 2 + r].split("\t")[1:]] for r in range(len(tags))]
            confusions[name] = ConfusionMatrix(tags, np.array(rows, dtype=np.int64))
            i += 2 + len(tags)
        elif section == "folds" and cells[0] != "config":
            folds.setdefault(cells[0], []).append(float(cells[2]))
        elif section == "summary":
            configs[cells[0]] = json.loads(cells[3])
        elif section == "significance":
            sigs.setdefault(cells[0], {})[cells[1]] = Significance(
                float(cells[3]), int(cells[4]), cells[5] == "1", cells[2])
    try:
        return [EvalReport(FeatureConfig.from_dict(configs[n]), folds.get(n, []), confusions[n], name=n,
                           significance=sigs.get(n, {})) for n in configs]
    except KeyError as exc:
        raise DataFormatError(f"report section missing for {exc}") from None


def render_report(report: EvalReport | Sequence[EvalReport], fmt: str = "text") -> str:
    """Render one or more reports as ``text``, ``tsv`` or ``jsonl``."""
    reports = [report] if isinstance(report, EvalReport) else list(report)
    if not reports:
        return ""
    if fmt == "text":
        return _render_text(reports)
    if fmt == "tsv":
        return _render_tsv(reports)
    if fmt in ("jsonl", "json-lines"):
        return "".join(json.dumps(_report_dict(r), ensure_ascii=False, sort_keys=True) + "\n" for r in reports)
    raise ConfigurationError(f"unknown report format {fmt!r}")


def parse_report(text: str, fmt: str = "jsonl") -> list[EvalReport]:
    """Inverse of :func:`render_report` for the machine formats."""
    if fmt in ("jsonl", "json-lines"):
        return [_report_from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    if fmt == "tsv":
        return _parse_tsv(text)
    raise ConfigurationError(f"cannot parse report format {fmt!r}")


# Feature rows of the news-corpus ablation table, in order.
ABLATION_ROWS = (
    ("uni-gram", "c1"),
    ("bi-gram", "c2"),
    ("tri-gram", "c3"),
    ("word segmentation", "w1"),
    ("character form", "form"),
    ("PMI", "pmi"),
    ("word alignment", "align"),
    ("bi-gram + character form", "c2+form"),
    ("bi-gram + PMI", "c2+pmi"),
    ("bi-gram + word alignment", "c2+align"),
    ("bi-gram + character form + PMI", "c2+form+pmi"),
    ("bi-gram + PMI + word alignment", "c2+pmi+align"),
    ("bi-gram + character form + word alignment", "c2+form+align"),
    ("bi-gram + character form + PMI + word alignment", "c2+form+pmi+align"),
)
