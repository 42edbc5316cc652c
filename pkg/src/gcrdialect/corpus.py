"""Labeled sentence corpora: loading, filtering, balancing, script conversion, splits."""

from __future__ import annotations

import random
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError, DataFormatError, InsufficientDataError
from .segmentation import FMMSegmenter, Segmenter

_TAG_ID = re.compile(r"[A-Z][A-Z0-9_]*\Z")
_LATIN_RUN = re.compile(r"[A-Za-z]+")


@dataclass(frozen=True)
class DialectTag:
    id: str
    display_name: str = ""

    def __post_init__(self):
        if not _TAG_ID.match(self.id):
            raise ValueError(f"invalid tag id {self.id!r}")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)

    def __str__(self) -> str:
        return self.id


GCR_TAGS = (
    DialectTag("MC", "Mainland China"),
    DialectTag("HK", "Hong Kong"),
    DialectTag("TW", "Taiwan"),
    DialectTag("MAC", "Macao"),
    DialectTag("MAL", "Malaysia"),
    DialectTag("SGP", "Singapore"),
)

SIMPLIFIED_GROUP = DialectTag("SIMPLIFIED", "Simplified-script group")
TRADITIONAL_GROUP = DialectTag("TRADITIONAL", "Traditional-script group")

# Tag-id selections for each evaluation frame; 2-way frames merge into two groups.
SCENARIOS = {
    "6way": {"news": ("MC", "HK", "TW", "MAC", "MAL", "SGP"),
             "wiki": ("MC", "HK", "TW", "MAC", "MAL", "SGP")},
    "3way": {"news": ("MC", "TW", "SGP"), "wiki": ("MC", "HK", "TW")},
    "2way": {"news": (("MC", "MAL", "SGP"), ("HK", "TW", "MAC")),
             "wiki": (("MC",), ("HK", "TW"))},
}


def validate_tag_set(tags) -> tuple[DialectTag, ...]:
    tags = tuple(tags)
    if len(tags) < 2:
        raise ConfigurationError("a tag set needs at least two tags")
    ids = [t.id for t in tags]
    dupes = sorted(i for i, n in Counter(ids).items() if n > 1)
    if dupes:
        raise ConfigurationError(f"duplicate tag ids: {', '.join(dupes)}")
    return tags


def load_tag_set(path: str | Path) -> tuple[DialectTag, ...]:
    """Read ``id<TAB>display name`` lines (display name optional)."""
    tags = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            tag_id, _, name = line.partition("\t")
            try:
                tags.append(DialectTag(tag_id.strip(), name.strip()))
            except ValueError as exc:
                raise DataFormatError(str(exc), path=str(path), line=lineno) from None
    return validate_tag_set(tags)


def tags_from_ids(ids, known=GCR_TAGS) -> tuple[DialectTag, ...]:
    by_id = {t.id: t for t in known}
    return validate_tag_set(by_id.get(i) or DialectTag(i) for i in ids)


@dataclass(frozen=True)
class LabeledSentence:
    text: str
    tag: DialectTag

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("sentence text is empty")
        if "\t" in self.text or "\n" in self.text or "\r" in self.text:
            raise ValueError("sentence text contains a tab or newline")


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[LabeledSentence, ...]
    tag_set: tuple[DialectTag, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "tag_set", tuple(self.tag_set))
        allowed = set(self.tag_set)
        for s in self.sentences:
            if s.tag not in allowed:
                raise ValueError(f"sentence tag {s.tag.id} not in tag set")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]

    @property
    def labels(self) -> list[DialectTag]:
        return [s.tag for s in self.sentences]

    def class_counts(self) -> dict[DialectTag, int]:
        counts = Counter(s.tag for s in self.sentences)
        return {t: counts.get(t, 0) for t in self.tag_set}

    def replace(self, sentences) -> Corpus:
        return Corpus(tuple(sentences), self.tag_set)

    def present_tags(self) -> Corpus:
        """Shrink the tag set to the tags that label at least one sentence."""
        seen = {s.tag for s in self.sentences}
        return Corpus(self.sentences, tuple(t for t in self.tag_set if t in seen))

    def map_text(self, fn) -> Corpus:
        return self.replace(LabeledSentence(fn(s.text), s.tag) for s in self.sentences)


def load_tsv(path: str | Path, tag_set) -> Corpus:
    """Load ``tag_id<TAB>text`` lines; blank and ``#`` lines are skipped."""
    tag_set = tuple(tag_set)
    by_id = {t.id: t for t in tag_set}
    sentences = []
    with open(path, "rb") as handle:
        for lineno, raw in enumerate(handle, 1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise DataFormatError("invalid UTF-8", path=str(path), line=lineno) from None
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise DataFormatError("malformed line (no tab)", path=str(path), line=lineno)
            tag_id, text = line.split("\t", 1)
            tag = by_id.get(tag_id)
            if tag is None:
                raise DataFormatError(f"unknown tag {tag_id}", path=str(path), line=lineno)
            try:
                sentences.append(LabeledSentence(text, tag))
            except ValueError as exc:
                raise DataFormatError(str(exc), path=str(path), line=lineno) from None
    return Corpus(tuple(sentences), tag_set)


def write_tsv(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for s in corpus.sentences:
            handle.write(f"{s.tag.id}\t{s.text}\n")


def _is_punctuation(token: str) -> bool:
    return all(unicodedata.category(ch)[0] in "PS" for ch in token)


def count_tokens(text: str, segmenter: Segmenter, count_punctuation: bool = False) -> tuple[int, int]:
    """Return ``(latin_tokens, total_tokens)`` for ``text``.

    Maximal ``[A-Za-z]+`` runs count as one Latin token each; the remaining
    stretches are handed to ``segmenter``.
    """
    latin = 0
    other = 0
    pos = 0
    chunks = []
    for m in _LATIN_RUN.finditer(text):
        chunks.append(text[pos:m.start()])
        latin += 1
        pos = m.end()
    chunks.append(text[pos:])
    for chunk in chunks:
        if not chunk.strip():
            continue
        for tok in segmenter.segment(chunk):
            if not tok.strip():
                continue
            if not count_punctuation and _is_punctuation(tok):
                continue
            other += 1
    return latin, latin + other


def filter_corpus(
    corpus: Corpus,
    max_latin_ratio: float = 0.5,
    min_tokens: int = 15,
    segmenter: Segmenter | None = None,
    *,
    dedupe: bool = True,
    count_punctuation: bool = False,
) -> Corpus:
    """Drop Latin-heavy sentences, short sentences and (optionally) exact duplicates.

    A sentence is removed when its Latin token ratio is ``>= max_latin_ratio``
    or when it has fewer than ``min_tokens`` tokens. Survivors keep their order.
    """
    if not 0.0 <= max_latin_ratio <= 1.0:
        raise ConfigurationError("max_latin_ratio must lie in [0, 1]")
    if min_tokens < 0:
        raise ConfigurationError("min_tokens must be >= 0")
    segmenter = segmenter or FMMSegmenter()
    kept = []
    seen = set()
    for s in corpus.sentences:
        if dedupe:
            if s.text in seen:
                continue
            seen.add(s.text)
        latin, total = count_tokens(s.text, segmenter, count_punctuation)
        ratio = latin / total if total else 0.0
        if ratio >= max_latin_ratio or total < min_tokens:
            continue
        kept.append(s)
    return corpus.replace(kept)


def balance_sample(corpus: Corpus, per_class: int, seed: int) -> Corpus:
    """Sample exactly ``per_class`` sentences of every tag, grouped in tag order."""
    if per_class < 0:
        raise ConfigurationError("per_class must be >= 0")
    groups = {t: [] for t in corpus.tag_set}
    for s in corpus.sentences:
        groups[s.tag].append(s)
    short = [f"{t.id} has {len(g)}" for t, g in groups.items() if len(g) < per_class]
    if short:
        raise InsufficientDataError(
            f"need {per_class} sentences per tag but " + ", ".join(short))
    rng = random.Random(seed)
    out = []
    for tag in corpus.tag_set:
        group = list(groups[tag])
        rng.shuffle(group)
        out.extend(group[:per_class])
    return corpus.replace(out)


@dataclass(frozen=True)
class ScriptConversionTable:
    """Traditional to simplified character mapping, one code point to one code point."""

    mapping: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for src, dst in self.mapping.items():
            if len(src) != 1 or len(dst) != 1:
                raise ValueError(f"conversion entries must be single code points: {src!r}->{dst!r}")
            if src == dst:
                raise ValueError(f"conversion entry maps {src!r} to itself")
        clash = set(self.mapping) & set(self.mapping.values())
        if clash:
            raise ValueError("conversion targets also appear as sources: " + "".join(sorted(clash)))

    @cached_property
    def _translation(self) -> dict[int, str]:
        return {ord(k): v for k, v in self.mapping.items()}

    @classmethod
    def load(cls, path: str | Path) -> ScriptConversionTable:
        mapping = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataFormatError("expected traditional<TAB>simplified", path=str(path), line=lineno)
                mapping[parts[0]] = parts[1]
        try:
            return cls(mapping)
        except ValueError as exc:
            raise DataFormatError(str(exc), path=str(path)) from None

    @classmethod
    def default(cls) -> ScriptConversionTable:
        """The bundled starter table."""
        with resources.as_file(resources.files("gcrdialect") / "data" / "t2s.tsv") as path:
            return cls.load(path)

    def inverse(self) -> dict[str, str]:
        """Simplified to traditional; the smallest source wins when several collapse."""
        inv = {}
        for src in sorted(self.mapping):
            inv.setdefault(self.mapping[src], src)
        return inv

    def __len__(self) -> int:
        return len(self.mapping)


def to_simplified(text: str, table: ScriptConversionTable) -> str:
    return text.translate(table._translation)


def stratified_kfold(corpus: Corpus, k: int, seed: int) -> list[tuple[Corpus, Corpus]]:
    """Split into ``k`` (train, test) pairs with per-class test sizes differing by at most one."""
    if k < 2:
        raise ConfigurationError("k must be >= 2")
    by_tag = {t: [] for t in corpus.tag_set}
    for i, s in enumerate(corpus.sentences):
        by_tag[s.tag].append(i)
    small = [f"{t.id} has {len(ix)}" for t, ix in by_tag.items() if len(ix) < k]
    if small:
        raise InsufficientDataError(f"every class needs at least {k} sentences but " + ", ".join(small))
    rng = random.Random(seed)
    fold_of = [0] * len(corpus)
    for tag in corpus.tag_set:
        idx = list(by_tag[tag])
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            fold_of[i] = pos % k
    folds = []
    for f in range(k):
        train = [s for s, g in zip(corpus.sentences, fold_of) if g != f]
        test = [s for s, g in zip(corpus.sentences, fold_of) if g == f]
        folds.append((corpus.replace(train), corpus.replace(test)))
    return folds


def apply_scenario(corpus: Corpus, scenario: str, *, wiki: bool = False) -> Corpus:
    """Restrict or merge tags for a 6-way, 3-way or 2-way evaluation frame."""
    try:
        frame = SCENARIOS[scenario]["wiki" if wiki else "news"]
    except KeyError:
        raise ConfigurationError(f"unknown scenario {scenario!r}") from None
    if scenario != "2way":
        keep = [t for t in corpus.tag_set if t.id in frame]
        sents = [s for s in corpus.sentences if s.tag.id in frame]
        return Corpus(tuple(sents), tuple(keep)).present_tags()
    simp, trad = frame
    sents = []
    for s in corpus.sentences:
        if s.tag.id in simp:
            sents.append(LabeledSentence(s.text, SIMPLIFIED_GROUP))
        elif s.tag.id in trad:
            sents.append(LabeledSentence(s.text, TRADITIONAL_GROUP))
    return Corpus(tuple(sents), (SIMPLIFIED_GROUP, TRADITIONAL_GROUP))
