"""Sentence feature extraction and PMI dialect word sets."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, fields
from functools import cached_property
from importlib import resources as _resources
from pathlib import Path

from .corpus import Corpus, DialectTag
from .errors import ConfigurationError, DataFormatError, MissingResourceError, UndefinedPMIError
from .segmentation import Segmenter, char_ngrams

PMI = "PMI"
ALIGNMENT = "ALIGNMENT"
SCRIPT_FORM_KEY = "form:traditional"

# short name -> FeatureConfig flag, in canonical rendering order
FAMILIES = {
    "c1": "char_1g",
    "c2": "char_2g",
    "c3": "char_3g",
    "w1": "word_seg",
    "form": "script_form",
    "pmi": "pmi",
    "align": "alignment",
}
_ALIASES = {"unigram": "c1", "bigram": "c2", "trigram": "c3", "seg": "w1", "word": "w1",
            "script": "form", "alignment": "align"}


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature families are active, plus PMI word-set knobs."""

    char_1g: bool = False
    char_2g: bool = False
    char_3g: bool = False
    word_seg: bool = False
    script_form: bool = False
    pmi: bool = False
    alignment: bool = False
    pmi_top_k: int = 2000
    pmi_min_count: int = 5
    binary: bool = False

    def __post_init__(self):
        if not any(getattr(self, flag) for flag in FAMILIES.values()):
            raise ConfigurationError("at least one feature family must be enabled")
        if self.pmi_top_k < 1 or self.pmi_min_count < 1:
            raise ConfigurationError("pmi_top_k and pmi_min_count must be >= 1")

    @classmethod
    def parse(cls, spec: str, **kwargs) -> FeatureConfig:
        """Build from a ``+`` or ``,`` separated family list such as ``"c2+form+pmi"``."""
        flags = {}
        for part in spec.replace(",", "+").split("+"):
            part = part.strip().lower()
            if not part:
                continue
            part = _ALIASES.get(part, part)
            if part not in FAMILIES:
                raise ConfigurationError(
                    f"unknown feature family {part!r}; choose from {', '.join(FAMILIES)}")
            flags[FAMILIES[part]] = True
        return cls(**flags, **kwargs)

    @property
    def families(self) -> list[str]:
        return [short for short, flag in FAMILIES.items() if getattr(self, flag)]

    @property
    def name(self) -> str:
        return "+".join(self.families)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> FeatureConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown FeatureConfig fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TraditionalCharLexicon:
    chars: frozenset[str]

    def __post_init__(self):
        bad = [c for c in self.chars if len(c) != 1]
        if bad:
            raise ValueError(f"lexicon entries must be single code points: {bad[:3]}")

    @classmethod
    def load(cls, path: str | Path) -> TraditionalCharLexicon:
        chars = set()
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if len(line) != 1:
                    raise DataFormatError("expected one character per line", path=str(path), line=lineno)
                chars.add(line)
        return cls(frozenset(chars))

    @classmethod
    def default(cls) -> TraditionalCharLexicon:
        with _resources.as_file(_resources.files("gcrdialect") / "data" / "traditional_chars.txt") as p:
            return cls.load(p)

    def __contains__(self, ch: object) -> bool:
        return ch in self.chars

    def __len__(self) -> int:
        return len(self.chars)


def script_form_feature(text: str, lex: TraditionalCharLexicon) -> bool:
    """True when any character of ``text`` is a traditional form listed in ``lex``."""
    return any(ch in lex.chars for ch in text)


@dataclass(frozen=True)
class DialectWordSets:
    """Per-dialect word lists, from PMI ranking or alignment differencing."""

    tag_set: tuple[DialectTag, ...]
    per_tag: dict[DialectTag, frozenset[str]]
    provenance: str

    def __post_init__(self):
        if self.provenance not in (PMI, ALIGNMENT):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "tag_set", tuple(self.tag_set))
        stray = set(self.per_tag) - set(self.tag_set)
        if stray:
            raise ValueError(f"word sets for tags outside the tag set: {sorted(t.id for t in stray)}")
        per_tag = {t: frozenset(self.per_tag.get(t, ())) for t in self.tag_set}
        for words in per_tag.values():
            if any(not w for w in words):
                raise ValueError("word sets may not contain empty strings")
        object.__setattr__(self, "per_tag", per_tag)

    @cached_property
    def _signatures(self) -> dict[str, str]:
        members = defaultdict(list)
        for tag in self.tag_set:
            for word in self.per_tag[tag]:
                members[word].append(tag.id)
        return {w: "_".join(ids) for w, ids in members.items()}

    def signature(self, word: str) -> str | None:
        return self._signatures.get(word)

    def sizes(self) -> dict[str, int]:
        return {t.id: len(self.per_tag[t]) for t in self.tag_set}

    def all_words(self) -> set[str]:
        return set(self._signatures)

    def save(self, path: str | Path) -> None:
        """Write ``tag_id<TAB>word`` lines under a provenance header."""
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"# provenance: {self.provenance}\n")
            for tag in self.tag_set:
                for word in sorted(self.per_tag[tag]):
                    handle.write(f"{tag.id}\t{word}\n")

    @classmethod
    def load(cls, path: str | Path, tag_set) -> DialectWordSets:
        tag_set = tuple(tag_set)
        by_id = {t.id: t for t in tag_set}
        provenance = None
        per_tag = {t: set() for t in tag_set}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    if key.strip() == "provenance":
                        provenance = value.strip()
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[1]:
                    raise DataFormatError("expected tag_id<TAB>word", path=str(path), line=lineno)
                tag = by_id.get(parts[0])
                if tag is None:
                    raise DataFormatError(f"unknown tag {parts[0]}", path=str(path), line=lineno)
                per_tag[tag].add(parts[1])
        if provenance not in (PMI, ALIGNMENT):
            raise DataFormatError("missing or invalid '# provenance:' header", path=str(path))
        return cls(tag_set, per_tag, provenance)


def membership_signature(word: str, sets: DialectWordSets) -> str | None:
    """Ids of every dialect whose set holds ``word``, joined by ``_`` in tag-set order."""
    return sets.signature(word)


def pmi_score(word_count_in_dialect: int, word_count_total: int,
              dialect_word_total: int, corpus_word_total: int) -> float:
    """Natural-log PMI between a word and a dialect from raw counts.

    ``log(p(w, d) / (p(w) p(d)))`` with every probability estimated against the
    corpus token total. Returns exactly 0.0 when ``c_wd * N == c_w * N_d``.
    """
    c_wd, c_w, n_d, n = word_count_in_dialect, word_count_total, dialect_word_total, corpus_word_total
    if min(c_wd, c_w, n_d, n) < 0:
        raise ValueError("counts must be non-negative")
    if n <= 0:
        raise ValueError("corpus_word_total must be positive")
    if c_wd > c_w or c_wd > n_d or c_w > n or n_d > n:
        raise ValueError("inconsistent counts")
    if c_wd == 0:
        raise UndefinedPMIError("word never occurs in this dialect")
    # integer products keep the independence case exact
    return math.log((c_wd * n) / (c_w * n_d))


def count_words(train: Corpus, segmenter: Segmenter) -> tuple[dict[str, Counter], dict[DialectTag, int]]:
    """Word counts per dialect (``word -> Counter(tag -> count)``) and per-dialect token totals."""
    counts: dict[str, Counter] = defaultdict(Counter)
    totals = Counter()
    for s in train.sentences:
        for tok in segmenter.segment(s.text):
            counts[tok][s.tag] += 1
            totals[s.tag] += 1
    return counts, {t: totals.get(t, 0) for t in train.tag_set}


def build_pmi_sets(train: Corpus, segmenter: Segmenter, top_k: int = 2000, min_count: int = 5) -> DialectWordSets:
    """Keep the ``top_k`` highest-PMI words of each dialect.

    Only words with corpus frequency ``>= min_count`` compete. Ties fall to the
    higher in-dialect count, then to lexicographic order.
    """
    if top_k < 1 or min_count < 1:
        raise ConfigurationError("top_k and min_count must be >= 1")
    counts, totals = count_words(train, segmenter)
    n = sum(totals.values())
    per_tag = {}
    for tag in train.tag_set:
        scored = []
        for word, by_tag in counts.items():
            c_wd = by_tag.get(tag, 0)
            c_w = sum(by_tag.values())
            if c_wd == 0 or c_w < min_count:
                continue
            scored.append((-pmi_score(c_wd, c_w, totals[tag], n), -c_wd, word))
        scored.sort()
        per_tag[tag] = frozenset(word for _, _, word in scored[:top_k])
    return DialectWordSets(train.tag_set, per_tag, PMI)


@dataclass(frozen=True)
class SparseFeatureVector:
    """Index/value pairs sorted by strictly increasing index."""

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        prev = -1
        for i, v in zip(self.indices, self.values):
            if i <= prev:
                raise ValueError("indices must be strictly increasing and non-negative")
            if v == 0 or not math.isfinite(v):
                raise ValueError(f"feature value must be finite and non-zero, got {v}")
            prev = i

    @classmethod
    def from_mapping(cls, mapping: dict[int, float]) -> SparseFeatureVector:
        items = sorted((i, float(v)) for i, v in mapping.items() if v != 0)
        return cls(tuple(i for i, _ in items), tuple(v for _, v in items))

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices, self.values))

    def __len__(self) -> int:
        return len(self.indices)


class FeatureSpace:
    """Dense indexing of feature keys; frozen spaces drop unseen keys."""

    def __init__(self, keys=(), frozen: bool = False):
        self.key_to_index: dict[str, int] = {}
        for key in keys:
            self.add(key)
        self.frozen = frozen

    def add(self, key: str) -> int | None:
        idx = self.key_to_index.get(key)
        if idx is None and not getattr(self, "frozen", False):
            idx = len(self.key_to_index)
            self.key_to_index[key] = idx
        return idx

    def get(self, key: str) -> int | None:
        return self.key_to_index.get(key)

    def freeze(self) -> FeatureSpace:
        self.frozen = True
        return self

    @property
    def keys(self) -> list[str]:
        return list(self.key_to_index)

    def __len__(self) -> int:
        return len(self.key_to_index)

    def __contains__(self, key: object) -> bool:
        return key in self.key_to_index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FeatureSpace) and self.keys == other.keys and self.frozen == other.frozen


@dataclass
class Resources:
    """Everything feature extraction may need beyond the sentence itself."""

    segmenter: Segmenter | None = None
    traditional: TraditionalCharLexicon | None = None
    pmi_sets: DialectWordSets | None = None
    align_sets: DialectWordSets | None = None
    extra: dict = field(default_factory=dict)

    def check(self, config: FeatureConfig) -> None:
        needs = []
        if (config.word_seg or config.pmi or config.alignment) and self.segmenter is None:
            needs.append("segmenter")
        if config.script_form and not self.traditional:
            needs.append("traditional character lexicon")
        if config.pmi and self.pmi_sets is None:
            needs.append("PMI word sets")
        if config.alignment and self.align_sets is None:
            needs.append("alignment word sets")
        if needs:
            raise MissingResourceError(f"missing resource for {config.name}: {', '.join(needs)}")


def feature_counts(text: str, config: FeatureConfig, res: Resources) -> dict[str, float]:
    """Feature key -> value for one sentence, keys in first-emitted order."""
    out: dict[str, float] = {}

    def bump(key):
        out[key] = out.get(key, 0.0) + 1.0

    for n, flag in ((1, config.char_1g), (2, config.char_2g), (3, config.char_3g)):
        if flag:
            for gram in char_ngrams(text, n):
                bump(f"c{n}:{gram}")
    tokens = None
    if config.word_seg or config.pmi or config.alignment:
        tokens = res.segmenter.segment(text)
    if config.word_seg:
        for tok in tokens:
            bump(f"w1:{tok}")
    if config.script_form and script_form_feature(text, res.traditional):
        out[SCRIPT_FORM_KEY] = 1.0
    for flag, prefix, sets in ((config.pmi, "pmi", res.pmi_sets), (config.alignment, "align", res.align_sets)):
        if flag:
            for tok in tokens:
                sig = sets.signature(tok)
                if sig is not None:
                    out[f"{prefix}:{sig}"] = 1.0
    if config.binary:
        out = dict.fromkeys(out, 1.0)
    return out


def extract(text: str, config: FeatureConfig, resources: Resources, space: FeatureSpace) -> SparseFeatureVector:
    resources.check(config)
    mapping = {}
    for key, value in feature_counts(text, config, resources).items():
        idx = space.add(key)
        if idx is not None:
            mapping[idx] = value
    return SparseFeatureVector.from_mapping(mapping)


def extract_many(texts, config: FeatureConfig, resources: Resources, space: FeatureSpace) -> list[SparseFeatureVector]:
    resources.check(config)
    return [extract(t, config, resources, space) for t in texts]


def fit_space(train: Corpus, config: FeatureConfig, resources: Resources) -> FeatureSpace:
    """Collect every key emitted on ``train`` in first-seen order and freeze.

    The script-form family has a single fixed key, which is always registered
    when the family is on.
    """
    resources.check(config)
    space = FeatureSpace()
    if config.script_form:
        space.add(SCRIPT_FORM_KEY)
    for s in train.sentences:
        for key in feature_counts(s.text, config, resources):
            space.add(key)
    if len(space) == 0:
        raise ConfigurationError(f"no features collected for {config.name}")
    return space.freeze()
