"""Deterministic planted-marker corpora for exercising the pipeline at desk scale.

Every sentence is a run of words drawn from a vocabulary shared by all tags,
with a few tag-specific marker words inserted at non-adjacent positions.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field

from .alignment import ParallelPair
from .corpus import Corpus, DialectTag, LabeledSentence, ScriptConversionTable
from .errors import ConfigurationError, InvariantError
from .segmentation import Lexicon

_CJK = range(0x4E00, 0x9FA6)


@dataclass
class SyntheticData:
    corpus: Corpus
    lexicon: Lexicon
    markers: dict[DialectTag, list[str]]
    pairs: list[ParallelPair] = field(default_factory=list)


@dataclass(frozen=True)
class GeneratorSettings:
    per_class: int = 300
    markers: int = 80
    ambiguity: float = 0.02
    markers_per_sentence: int = 3
    min_words: int = 15
    max_words: int = 22
    shared_words: int = 300
    bigram_markers: bool = False
    scripted: tuple[str, ...] = ()
    pairs_per_tag: int = 0
    pivot: str | None = None


def _check(tags, s: GeneratorSettings) -> None:
    if s.markers < 1:
        raise ConfigurationError("marker vocabulary size must be >= 1 for a separable corpus")
    if s.per_class < 1:
        raise ConfigurationError("per_class must be >= 1")
    if not 0.0 <= s.ambiguity <= 1.0:
        raise ConfigurationError("ambiguity must lie in [0, 1]")
    if s.markers_per_sentence < 1 or s.min_words <= s.markers_per_sentence or s.max_words < s.min_words:
        raise ConfigurationError("need min_words > markers_per_sentence >= 1 and max_words >= min_words")
    if s.bigram_markers and len(tags) > s.markers - 1:
        raise ConfigurationError(f"--bigram-markers needs markers >= tags + 1 (got {s.markers} for {len(tags)} tags)")
    unknown = set(s.scripted) - {t.id for t in tags}
    if unknown:
        raise ConfigurationError(f"scripted tags not in tag set: {sorted(unknown)}")
    if s.pairs_per_tag and s.pivot is not None and s.pivot not in {t.id for t in tags}:
        raise ConfigurationError(f"pivot tag {s.pivot} not in tag set")
    if s.shared_words < 2:
        raise ConfigurationError("shared vocabulary needs at least two words")


def generate(tags, settings: GeneratorSettings = GeneratorSettings(), seed: int = 0,
             table: ScriptConversionTable | None = None) -> SyntheticData:
    tags = tuple(tags)
    _check(tags, settings)
    table = table or ScriptConversionTable.default()
    rng = random.Random(seed)

    to_trad = table.inverse()
    convertible = sorted(to_trad)
    generic = [chr(c) for c in _CJK if chr(c) not in table.mapping and chr(c) not in to_trad]
    rng.shuffle(generic)
    shared_chars = generic[:150] + convertible
    free = iter(generic[150:])

    shared = []
    seen = set()
    while len(shared) < settings.shared_words:
        word = "".join(rng.choice(shared_chars) for _ in range(rng.choice((1, 2, 2, 3))))
        if word not in seen:
            seen.add(word)
            shared.append(word)
    with_convertible = [w for w in shared if any(ch in to_trad for ch in w)]
    if settings.scripted and not with_convertible:
        raise ConfigurationError("shared vocabulary has no convertible characters")

    markers: dict[DialectTag, list[str]] = {}
    if settings.bigram_markers:
        pool = [next(free) for _ in range(settings.markers)]
        q = len(pool)
        for r, tag in enumerate(tags):
            # every tag uses each pool character once as first and once as second letter
            markers[tag] = [pool[i] + pool[(i + r + 1) % q] for i in range(q)]
    else:
        for tag in tags:
            markers[tag] = [next(free) + next(free) for _ in range(settings.markers)]

    def context(length):
        return [rng.choice(shared) for _ in range(length)]

    def insert(words, planted):
        gaps = sorted(rng.sample(range(len(words) + 1), len(planted)), reverse=True)
        out = list(words)
        for gap, marker in zip(gaps, planted):
            out.insert(gap, marker)
        return out

    sentences = []
    for tag in tags:
        others = [t for t in tags if t != tag]
        for _ in range(settings.per_class):
            length = rng.randint(settings.min_words, settings.max_words)
            words = context(length - settings.markers_per_sentence)
            planted = []
            for _ in range(settings.markers_per_sentence):
                owner = tag
                if others and rng.random() < settings.ambiguity:
                    owner = rng.choice(others)
                planted.append(rng.choice(markers[owner]))
            words = insert(words, planted)
            text = "".join(words)
            if tag.id in settings.scripted:
                if not any(ch in to_trad for ch in text):
                    slot = next(i for i, w in enumerate(words) if w not in planted)
                    words[slot] = rng.choice(with_convertible)
                    text = "".join(words)
                text = "".join(to_trad.get(ch, ch) for ch in text)
            sentences.append(LabeledSentence(text, tag))

    if settings.bigram_markers:
        _assert_shared_marker_chars(sentences, markers)

    pairs = []
    if settings.pairs_per_tag:
        pivot = next(t for t in tags if t.id == (settings.pivot or tags[0].id))
        for tag in tags:
            if tag == pivot:
                continue
            for _ in range(settings.pairs_per_tag):
                k = rng.randrange(settings.markers if not settings.bigram_markers else len(markers[pivot]))
                left = context(rng.randint(3, 8))
                right = context(rng.randint(3, 8))
                pairs.append(ParallelPair(left + [markers[pivot][k]] + right,
                                          left + [markers[tag][k]] + right, tag))

    lexicon = Lexicon.from_words(shared + [m for ms in markers.values() for m in ms])
    return SyntheticData(Corpus(tuple(sentences), tags), lexicon, markers, pairs)


def _assert_shared_marker_chars(sentences, markers) -> None:
    char_tags = defaultdict(set)
    for s in sentences:
        for ch in set(s.text):
            char_tags[ch].add(s.tag)
    for ms in markers.values():
        for m in ms:
            for ch in m:
                if len(char_tags[ch]) < 2:
                    raise InvariantError(
                        f"marker character {ch!r} occurs in fewer than two classes; "
                        "increase per_class")
