"""Acceptance criteria 1-10, each run at its stated tolerance and time budget.

Every test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary.  Run alone with ``pytest tests/test_acceptance.py -s``.
"""

from __future__ import annotations

import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gcrdialect import cli
from gcrdialect import model as lm
from gcrdialect.alignment import ParallelPair, build_alignment_sets, lcs
from gcrdialect.corpus import GCR_TAGS, Corpus, LabeledSentence, ScriptConversionTable, apply_scenario, load_tsv
from gcrdialect.evaluation import cross_validate, paired_t_test, parse_report, render_report
from gcrdialect.features import FeatureConfig, TraditionalCharLexicon, pmi_score
from gcrdialect.segmentation import FMMSegmenter, Lexicon
from gcrdialect.synth import GeneratorSettings, generate

MC, HK, TW, MAC, MAL, SGP = GCR_TAGS


@contextmanager
def criterion(number: int, title: str, budget: float):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        line = f"FAIL criterion {number:>2} [{elapsed:6.2f}s/{budget:g}s] {title}: {exc}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    extra = "; ".join(f"{k}={v}" for k, v in detail.items())
    line = f"PASS criterion {number:>2} [{elapsed:6.2f}s/{budget:g}s] {title}" + (f" ({extra})" if extra else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def _fmt(x: float) -> str:
    return f"{x:.4f}"


# 1 ------------------------------------------------------------------------

def _pmi_brute(c_wd, c_w, n_d, n):
    return math.log(Fraction(c_wd, n) / (Fraction(c_w, n) * Fraction(n_d, n)))


def test_c01_pmi_oracle():
    with criterion(1, "PMI matches brute force on 1000 count tables", 1.0) as info:
        rng = random.Random(11)
        worst = 0.0
        for _ in range(1000):
            d, w = rng.randint(2, 6), rng.randint(1, 8)
            table = [[rng.randint(0, 200) for _ in range(d)] for _ in range(w)]
            j = rng.randrange(d)
            table[0][j] = max(table[0][j], 1)
            c_wd, c_w = table[0][j], sum(table[0])
            n_d, n = sum(r[j] for r in table), sum(map(sum, table))
            worst = max(worst, abs(pmi_score(c_wd, c_w, n_d, n) - _pmi_brute(c_wd, c_w, n_d, n)))
        assert worst <= 1e-9
        for _ in range(200):
            # build an exactly independent cell: c_wd * N == c_w * N_d
            n_d, rest = rng.randint(1, 50), rng.randint(1, 50)
            k = rng.randint(1, 5)
            c_wd, c_other = k * n_d, k * rest
            n = (n_d + rest) * (k + 1)
            assert pmi_score(c_wd, c_wd + c_other, n_d * (k + 1), n) == 0.0
        info["max_abs_err"] = f"{worst:.1e}"


# 2 ------------------------------------------------------------------------

def _lcs_len_exhaustive(a, b):
    def sub(seq, of):
        it = iter(of)
        return all(x in it for x in seq)
    for size in range(min(len(a), len(b)), -1, -1):
        if any(sub([a[i] for i in ix], b) for ix in combinations(range(len(a)), size)):
            return size
    return 0


def test_c02_lcs_oracle():
    with criterion(2, "LCS length equals exhaustive enumeration on 500 pairs", 10.0):
        rng = random.Random(5)
        for _ in range(500):
            alphabet = "abcd"[: rng.randint(1, 4)]
            a = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
            b = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
            pairs = lcs(a, b)
            assert len(pairs) == _lcs_len_exhaustive(a, b), (a, b)
            assert all(a[i] == b[j] for i, j in pairs)


# 3 ------------------------------------------------------------------------

def _cv(data, spec, **kw):
    seg = FMMSegmenter(data.lexicon)
    return cross_validate(data.corpus, FeatureConfig.parse(spec), lm.TrainSettings(), 5, 0, segmenter=seg,
                          traditional=TraditionalCharLexicon.default(), **kw)


def test_c03_planted_markers(planted3):
    with criterion(3, "planted markers: bigram >= 0.95, all features >= bigram - 0.01", 60.0) as info:
        bigram = _cv(planted3, "c2")
        combined = _cv(planted3, "c2+form+pmi+align", pairs=planted3.pairs, pivot_tag=MC,
                       pair_table=ScriptConversionTable.default())
        info["bigram"] = _fmt(bigram.mean_accuracy)
        info["combined"] = _fmt(combined.mean_accuracy)
        assert bigram.mean_accuracy >= 0.95
        assert combined.mean_accuracy >= bigram.mean_accuracy - 0.01


# 4 ------------------------------------------------------------------------

def test_c04_bigram_over_unigram():
    with criterion(4, "bigram-marker fixture: bigram - unigram >= 0.10, significant at 0.01", 60.0) as info:
        data = generate(GCR_TAGS[:3], GeneratorSettings(per_class=300, bigram_markers=True), seed=0)
        uni = _cv(data, "c1")
        bi = _cv(data, "c2")
        res = paired_t_test(bi.fold_accuracies, uni.fold_accuracies)
        info["unigram"] = _fmt(uni.mean_accuracy)
        info["bigram"] = _fmt(bi.mean_accuracy)
        info["t"] = f"{res.t:.2f}"
        assert bi.mean_accuracy - uni.mean_accuracy >= 0.10
        assert res.t > 0 and res.significant_at(0.01)


# 5 ------------------------------------------------------------------------

def test_c05_script_form():
    with criterion(5, "script form: 2-way >= 0.95, after conversion <= 1/D + 0.05", 30.0) as info:
        data = generate(GCR_TAGS, GeneratorSettings(per_class=300, scripted=("HK", "TW", "MAC")), seed=0)
        form = FeatureConfig(script_form=True)
        lex = TraditionalCharLexicon.default()
        two = cross_validate(apply_scenario(data.corpus, "2way"), form, k=5, seed=0, traditional=lex)
        six = cross_validate(data.corpus, form, k=5, seed=0, traditional=lex,
                             convert=ScriptConversionTable.default())
        d = len(data.corpus.tag_set)
        info["2way"] = _fmt(two.mean_accuracy)
        info[f"{d}way_converted"] = _fmt(six.mean_accuracy)
        assert two.mean_accuracy >= 0.95
        assert six.mean_accuracy <= 1 / d + 0.05


# 6 ------------------------------------------------------------------------

VARIANT_EXPRESSIONS = [  # Mainland, Hong Kong, Taiwan
    ("出租车", "的士", "计程车"),
    ("查找", "寻找", "寻找"),
    ("生态圈", "生态系", "生态系"),
    ("方便面", "即食面", "速食面"),
    ("乒乓球拍", "乒乓球拍", "桌球拍"),
    ("人机界面", "人机介面", "人机介面"),
    ("五角大楼", "五角大厦", "五角大厦"),
]


def test_c06_alignment_recovery():
    with criterion(6, "alignment sets recover the divergent expressions exactly", 1.0):
        left, right = ["我们", "昨天", "看到"], ["的", "新闻"]
        pairs = []
        for mc, hk, tw in VARIANT_EXPRESSIONS:
            for word, tag in ((hk, HK), (tw, TW)):
                pairs.append(ParallelPair(left + [mc] + right, left + [word] + right, tag))
        sets = build_alignment_sets(pairs, MC, tag_set=(MC, HK, TW))
        expect = {
            MC: {mc for mc, hk, tw in VARIANT_EXPRESSIONS if mc != hk or mc != tw},
            HK: {hk for mc, hk, _ in VARIANT_EXPRESSIONS if hk != mc},
            TW: {tw for mc, _, tw in VARIANT_EXPRESSIONS if tw != mc},
        }
        for tag, words in expect.items():
            assert set(sets.per_tag[tag]) == words, tag.id
        assert "出租车" in sets.per_tag[MC] and "的士" in sets.per_tag[HK] and "计程车" in sets.per_tag[TW]


# 7 ------------------------------------------------------------------------

def test_c07_no_leakage():
    with criterion(7, "test-only words never reach PMI sets, alignment sets or feature space", 30.0) as info:
        base = generate(GCR_TAGS[:3], GeneratorSettings(per_class=60), seed=2)
        used = {ch for s in base.corpus for ch in s.text}
        free = (chr(c) for c in range(0x4E00, 0x9FA6) if chr(c) not in used and chr(c) not in base.lexicon.entries)
        sents, canaries, pairs = [], {}, []
        for s in base.corpus:
            # every sentence gets its own canary word, so each one occurs in exactly one fold
            word = next(free) + next(free)
            canaries[s.text + word] = word
            sents.append(LabeledSentence(s.text + word, s.tag))
            if s.tag == MC:
                # a pair built from the sentence itself; it must be withheld while the sentence is under test
                pairs.append(ParallelPair([s.text, word], [s.text, "替身"], HK))
        corpus = Corpus(tuple(sents), base.corpus.tag_set)
        lexicon = Lexicon.from_words(set(base.lexicon.entries) | set(canaries.values()))
        seg = FMMSegmenter(lexicon)
        cfg = FeatureConfig.parse("c1+c2+c3+w1+pmi+align", pmi_min_count=1, pmi_top_k=100000)
        unfiltered = build_alignment_sets(pairs, MC)
        assert set(canaries.values()) & unfiltered.all_words(), "control: canaries should reach unfiltered sets"
        checked = 0

        def hook(f, train, test, res, space, model):
            nonlocal checked
            test_only = {canaries[s.text] for s in test}
            chars = {ch for w in test_only for ch in w}
            assert not test_only & res.pmi_sets.all_words()
            assert not test_only & res.align_sets.all_words()
            assert not any(ch in key for key in space.keys for ch in chars)
            assert res.align_sets.all_words(), "alignment sets unexpectedly empty"
            checked += len(test_only)

        cross_validate(corpus, cfg, lm.TrainSettings(epochs=5), 5, 0, segmenter=seg,
                       traditional=TraditionalCharLexicon.default(), pairs=pairs, pivot_tag=MC, on_fold=hook)
        info["canaries_checked"] = checked
        assert checked == len(corpus)


# 8 ------------------------------------------------------------------------

def test_c08_t_test():
    with criterion(8, "paired t closed form and identical-sample case", 1.0) as info:
        b = [0.70, 0.72, 0.71, 0.69, 0.73]
        d = [0.02, 0.01, 0.03, 0.02, 0.02]
        res = paired_t_test([x + y for x, y in zip(b, d)], b)
        info["t"] = f"{res.t:.4f}"
        assert abs(res.t - 6.3246) <= 1e-3 and res.df == 4 and res.significant_at(0.01)
        same = paired_t_test(b, b)
        assert same.t == 0 and not same.significant_at(0.01) and not same.significant_at(0.05)


# 9 ------------------------------------------------------------------------

def test_c09_determinism(tmp_path):
    with criterion(9, "byte-identical generation, dictionaries, models and reports; round trip 1e-12", 60.0):
        outputs = []
        for run in ("a", "b"):
            d = tmp_path / run
            d.mkdir()
            steps = [
                ["gen-corpus", "--num-tags", "3", "--per-class", "120", "--seed", "9", "--out", d / "c.tsv",
                 "--lexicon-out", d / "lex.txt", "--pairs-out", d / "pairs.tsv", "--pairs-per-tag", "50"],
                ["build-dicts", "--pmi", d / "c.tsv", "--align", d / "pairs.tsv", "--pre-segmented",
                 "--pmi-out", d / "pmi.tsv", "--align-out", d / "align.tsv"],
                ["train", d / "c.tsv", "--model", d / "m.txt", "--features", "c2+form+pmi+align",
                 "--lexicon", d / "lex.txt", "--pmi-sets", d / "pmi.tsv", "--align-sets", d / "align.tsv",
                 "--seed", "9"],
                ["evaluate", d / "c.tsv", "--features", "c1", "--features", "c2+pmi", "--lexicon", d / "lex.txt",
                 "--format", "tsv", "--out", d / "report.tsv", "--seed", "9"],
            ]
            for argv in steps:
                assert cli.main([str(a) for a in argv]) == 0, argv
            outputs.append({name: (d / name).read_bytes()
                            for name in ("c.tsv", "lex.txt", "pairs.tsv", "pmi.tsv", "align.tsv", "m.txt",
                                         "report.tsv")})
        for name in outputs[0]:
            assert outputs[0][name] == outputs[1][name], name
        model = lm.load(tmp_path / "a" / "m.txt")
        lm.save(model, tmp_path / "copy.txt")
        again = lm.load(tmp_path / "copy.txt")
        assert (tmp_path / "copy.txt").read_bytes() == outputs[0]["m.txt"]
        rng = np.random.default_rng(0)
        from gcrdialect.features import SparseFeatureVector
        vecs = [SparseFeatureVector.from_mapping({int(i): float(rng.normal())
                                                 for i in rng.choice(model.n_features, 8, replace=False)})
                for _ in range(100)]
        assert np.abs(lm.decision_matrix(model, vecs) - lm.decision_matrix(again, vecs)).max() <= 1e-12


# 10 -----------------------------------------------------------------------

def test_c10_report_structure(small6):
    with criterion(10, "6-way report: 6x6 grid, rows sum to class counts, per-class = diag/row", 5.0):
        report = cross_validate(small6.corpus, FeatureConfig(char_2g=True), k=5, seed=0)
        back = parse_report(render_report(report, "tsv"), "tsv")[0]
        counts = back.confusion.counts
        assert counts.shape == (6, 6)
        class_counts = small6.corpus.class_counts()
        assert [int(x) for x in counts.sum(axis=1)] == [class_counts[t] for t in GCR_TAGS]
        for i, tag in enumerate(GCR_TAGS):
            assert back.per_class_accuracy[tag] == pytest.approx(counts[i, i] / counts[i].sum(), abs=0)
        text = render_report(report, "text")
        grid = text.split("Confusion matrix")[1].strip().splitlines()[2:]
        assert len(grid) == 6
        assert [row[:len(t.display_name)] for row, t in zip(grid, GCR_TAGS)] == [t.display_name for t in GCR_TAGS]
