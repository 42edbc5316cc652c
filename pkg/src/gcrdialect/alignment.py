"""Divergent-expression dictionaries mined from parallel sentence pairs.

Each pair is reduced to the token spans that are left over once the longest
common subsequence of tokens has been removed; spans that sit between the
same two anchors on both sides are taken as translations of each other.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from .corpus import DialectTag, ScriptConversionTable, to_simplified
from .errors import ConfigurationError, DataFormatError
from .features import ALIGNMENT, DialectWordSets
from .segmentation import Segmenter


@dataclass(frozen=True)
class ParallelPair:
    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    target_tag: DialectTag

    def __post_init__(self):
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        object.__setattr__(self, "target_tokens", tuple(self.target_tokens))
        if not self.source_tokens or not self.target_tokens:
            raise ValueError("both sides of a parallel pair must be non-empty")

    @property
    def source_text(self) -> str:
        return "".join(self.source_tokens)

    @property
    def target_text(self) -> str:
        return "".join(self.target_tokens)


@dataclass(frozen=True)
class DivergentPair:
    source_expr: str
    target_expr: str
    target_tag: DialectTag


def lcs(a, b) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence of ``a`` and ``b``.

    The backtrace starts at the end of both sequences, takes a match whenever
    the current tokens are equal, and otherwise steps back in ``a`` unless
    stepping back in ``b`` keeps a strictly longer subsequence.
    """
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        row, prev = table[i], table[i - 1]
        ai = a[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    pairs = []
    i, j = m, n
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def extract_divergent(pair: ParallelPair, table: ScriptConversionTable | None = None) -> list[DivergentPair]:
    """Aligned residual spans of ``pair`` once its token LCS is removed.

    With ``table`` both sides are converted to simplified script first. Gaps
    that are empty on one side are insertions or deletions and yield nothing.
    """
    src, tgt = pair.source_tokens, pair.target_tokens
    if table is not None:
        src = tuple(to_simplified(t, table) for t in src)
        tgt = tuple(to_simplified(t, table) for t in tgt)
    anchors = [(-1, -1), *lcs(src, tgt), (len(src), len(tgt))]
    out = []
    for (i0, j0), (i1, j1) in zip(anchors, anchors[1:]):
        left = "".join(src[i0 + 1:i1])
        right = "".join(tgt[j0 + 1:j1])
        if left and right and left != right:
            out.append(DivergentPair(left, right, pair.target_tag))
    return out


def count_divergent(pairs: Iterable[ParallelPair], table: ScriptConversionTable | None = None) -> Counter:
    counts = Counter()
    for pair in pairs:
        counts.update(extract_divergent(pair, table))
    return counts


def build_alignment_sets(
    pairs: Iterable[ParallelPair],
    pivot_tag: DialectTag,
    min_pair_count: int = 1,
    *,
    tag_set=None,
    table: ScriptConversionTable | None = None,
) -> DialectWordSets:
    """Per-dialect expression sets from every divergent pair seen ``min_pair_count`` times.

    Pivot-side expressions land in the pivot dialect's set and target-side
    expressions in the target dialect's set.
    """
    if min_pair_count < 1:
        raise ConfigurationError("min_pair_count must be >= 1")
    pairs = list(pairs)
    if tag_set is None:
        seen = {pivot_tag, *(p.target_tag for p in pairs)}
        tag_set = sorted(seen, key=lambda t: (t != pivot_tag, t.id))
    tag_set = tuple(tag_set)
    if pivot_tag not in tag_set:
        raise ConfigurationError(f"pivot tag {pivot_tag.id} not in tag set")
    per_tag = {t: set() for t in tag_set}
    for div, count in count_divergent(pairs, table).items():
        if count < min_pair_count:
            continue
        if div.target_tag not in per_tag:
            raise ConfigurationError(f"pair target tag {div.target_tag.id} not in tag set")
        per_tag[pivot_tag].add(div.source_expr)
        per_tag[div.target_tag].add(div.target_expr)
    return DialectWordSets(tag_set, per_tag, ALIGNMENT)


def load_pairs(path: str | Path, tag_set, segmenter: Segmenter) -> list[ParallelPair]:
    """Read ``pivot_text<TAB>target_tag_id<TAB>target_text`` lines.

    Both texts are tokenized with ``segmenter`` (use a whitespace segmenter
    for pre-segmented files).
    """
    by_id = {t.id: t for t in tag_set}
    pairs = []
    with open(path, "rb") as handle:
        for lineno, raw in enumerate(handle, 1):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError:
                raise DataFormatError("invalid UTF-8", path=str(path), line=lineno) from None
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError("expected pivot_text<TAB>target_tag<TAB>target_text",
                                      path=str(path), line=lineno)
            tag = by_id.get(parts[1])
            if tag is None:
                raise DataFormatError(f"unknown tag {parts[1]}", path=str(path), line=lineno)
            try:
                pairs.append(ParallelPair(segmenter.segment(parts[0]), segmenter.segment(parts[2]), tag))
            except ValueError as exc:
                raise DataFormatError(str(exc), path=str(path), line=lineno) from None
    return pairs


def write_pairs(pairs: Iterable[ParallelPair], path: str | Path) -> None:
    """Write pairs in pre-segmented form (tokens separated by single spaces)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for p in pairs:
            handle.write(f"{' '.join(p.source_tokens)}\t{p.target_tag.id}\t{' '.join(p.target_tokens)}\n")
