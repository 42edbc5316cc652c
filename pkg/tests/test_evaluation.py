from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from gcrdialect import model as lm
from gcrdialect.corpus import GCR_TAGS, Corpus, LabeledSentence
from gcrdialect.evaluation import (ABLATION_ROWS, T_CRITICAL, ConfusionMatrix, EvalReport, compare,
                                   cross_validate, mcnemar_test, paired_t_test, parse_report, render_report,
                                   t_critical)
from gcrdialect.features import FeatureConfig

MC, HK, TW, MAC, MAL, SGP = GCR_TAGS


@pytest.mark.parametrize("alpha", [0.05, 0.01])
def test_t_table_against_scipy(alpha):
    for df in range(1, 31):
        assert T_CRITICAL[alpha][df - 1] == pytest.approx(stats.t.ppf(1 - alpha / 2, df), abs=6e-4)
    assert t_critical(100, alpha) == T_CRITICAL[alpha][29]


def test_t_closed_form():
    base = [0.80, 0.81, 0.79, 0.80, 0.82]
    d = [0.02, 0.01, 0.03, 0.02, 0.02]
    res = paired_t_test([b + x for b, x in zip(base, d)], base)
    assert res.df == 4
    assert res.t == pytest.approx(0.02 / (math.sqrt(0.00005) / math.sqrt(5)), abs=1e-3)
    assert res.t == pytest.approx(6.3246, abs=1e-3)
    assert res.significant_at(0.01)
    ref = stats.ttest_rel([b + x for b, x in zip(base, d)], base)
    assert res.t == pytest.approx(ref.statistic, rel=1e-9)


def test_t_degenerate():
    same = paired_t_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
    assert same.t == 0 and not same.significant_at(0.05)
    up = paired_t_test([2, 2, 2, 2, 2], [1, 1, 1, 1, 1])
    assert up.t == math.inf and up.significant_at(0.01)
    with pytest.raises(ValueError):
        paired_t_test([1.0], [1.0])


def test_mcnemar():
    res = mcnemar_test([True] * 20 + [False] * 2, [False] * 20 + [True] * 2)
    assert res.only_a == 20 and res.only_b == 2
    assert res.statistic == pytest.approx((18 - 1) ** 2 / 22)
    assert res.significant_at(0.01)


def test_confusion_accuracy():
    cm = ConfusionMatrix((MC, HK))
    for t, p in [(MC, MC), (MC, HK), (HK, HK), (HK, HK)]:
        cm.add(t, p)
    assert cm.per_class_accuracy() == {MC: 0.5, HK: 1.0}
    assert cm.accuracy() == 0.75
    assert list(cm.row_sums) == [2, 2]


def _report(diag=True):
    counts = np.diag([50] * 6) if diag else np.array([
        [455, 5, 24, 3, 10, 3], [2, 480, 8, 4, 3, 3], [6, 9, 470, 7, 5, 3],
        [455, 5, 24, 3, 10, 3], [20, 1, 2, 3, 470, 4], [10, 2, 3, 1, 14, 470]])
    return EvalReport(FeatureConfig(char_2g=True), [0.9, 0.8, 0.85, 0.9, 0.95],
                      ConfusionMatrix(GCR_TAGS, counts), name="bi-gram")


def test_render_text_diagonal():
    text = render_report(_report(True), "text")
    per_class = text.split("Per-class accuracy")[1].split("Confusion")[0]
    assert per_class.count("100.00") == 6


def test_render_text_grid_shape():
    text = render_report(_report(False), "text")
    grid = text.split("Confusion matrix")[1].strip().splitlines()[2:]
    assert [row.split()[0] for row in grid][:3] == ["Mainland", "Hong", "Taiwan"]
    macao = next(r for r in grid if r.startswith("Macao"))
    assert macao.split()[1:] == ["455", "5", "24", "3", "10", "3"]
    assert len(grid) == 6


@pytest.mark.parametrize("fmt", ["jsonl", "tsv"])
def test_render_parse_round_trip(fmt):
    a, b = _report(False), _report(True)
    b.name = "uni-gram"
    compare(a, b)
    back = parse_report(render_report([a, b], fmt), fmt)
    assert back == [a, b]


def _separable_corpus(per_class=20):
    sents = []
    for k, tag in enumerate((MC, HK, TW)):
        for i in range(per_class):
            sents.append(LabeledSentence(f"{'甲乙丙'[k] * 3}{i}号", tag))
    return Corpus(tuple(sents), (MC, HK, TW))


def test_cross_validate_separable():
    report = cross_validate(_separable_corpus(), FeatureConfig(char_1g=True), k=5, seed=0)
    assert report.fold_accuracies == [1.0] * 5
    counts = report.confusion.counts
    assert (counts == np.diag(np.diag(counts))).all()
    assert list(report.confusion.row_sums) == [20, 20, 20]


def test_cross_validate_constant_features_is_chance():
    sents = [LabeledSentence("一样", t) for t in (MC, HK, TW, MAC) for _ in range(10)]
    report = cross_validate(Corpus(tuple(sents), GCR_TAGS[:4]), FeatureConfig(char_1g=True), k=5)
    assert report.mean_accuracy == pytest.approx(1 / 4)


def test_cross_validate_deterministic():
    corpus = _separable_corpus(10)
    cfg = FeatureConfig(char_2g=True)
    r1 = cross_validate(corpus, cfg, lm.TrainSettings(), 5, 3)
    r2 = cross_validate(corpus, cfg, lm.TrainSettings(), 5, 3)
    assert render_report(r1, "tsv") == render_report(r2, "tsv")


def test_compare_records_only_improvements():
    better = EvalReport(FeatureConfig(char_2g=True), [0.82, 0.81, 0.83, 0.82, 0.84], ConfusionMatrix((MC, HK)))
    worse = EvalReport(FeatureConfig(char_1g=True), [0.80, 0.80, 0.80, 0.80, 0.82], ConfusionMatrix((MC, HK)))
    assert compare(better, worse).significant
    assert not compare(worse, better).significant
    assert "c1" in better.significance


def test_ablation_rows():
    assert len(ABLATION_ROWS) == 14
    names = [FeatureConfig.parse(spec).name for _, spec in ABLATION_ROWS]
    assert len(set(names)) == 14
    assert names[-1] == "c2+form+pmi+align"
