"""Character n-grams, forward-maximum-matching segmentation and word n-grams."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

# U+241F SYMBOL FOR UNIT SEPARATOR joins tokens inside word n-gram keys.
WORD_SEPARATOR = "␟"


def strip_whitespace(text: str) -> str:
    return "".join(ch for ch in text if not ch.isspace())


@dataclass(frozen=True)
class Lexicon:
    """An immutable word list used by the forward maximum matching segmenter."""

    entries: frozenset[str]
    max_len: int

    @classmethod
    def from_words(cls, words: Iterable[str]) -> Lexicon:
        entries = set()
        for word in words:
            word = word.strip()
            if not word:
                continue
            if any(ch.isspace() for ch in word):
                raise ValueError(f"lexicon entry contains whitespace: {word!r}")
            entries.add(word)
        return cls(frozenset(entries), max((len(w) for w in entries), default=0))

    @classmethod
    def load(cls, path: str | Path) -> Lexicon:
        """Read a lexicon file: one word per line, ``#`` starts a comment line."""
        with open(path, encoding="utf-8") as handle:
            words = [ln.strip() for ln in handle if ln.strip() and not ln.lstrip().startswith("#")]
        return cls.from_words(words)

    def __contains__(self, word: object) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def char_ngrams(text: str, n: int) -> list[str]:
    """Sliding window of ``n`` code points over ``text`` with whitespace removed.

    >>> char_ngrams("出租车", 2)
    ['出租', '租车']
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    chars = strip_whitespace(text)
    return [chars[i:i + n] for i in range(len(chars) - n + 1)]


def fmm_segment(text: str, lexicon: Lexicon) -> list[str]:
    """Forward maximum matching over ``lexicon``.

    At each position the longest entry that prefixes the remaining text wins;
    when nothing matches, a single code point is emitted.
    """
    chars = strip_whitespace(text)
    tokens = []
    pos = 0
    while pos < len(chars):
        width = min(lexicon.max_len, len(chars) - pos)
        while width > 1 and chars[pos:pos + width] not in lexicon.entries:
            width -= 1
        width = max(width, 1)
        tokens.append(chars[pos:pos + width])
        pos += width
    return tokens


def word_ngrams(tokens: list[str], n: int) -> list[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [WORD_SEPARATOR.join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


class Segmenter(Protocol):
    def segment(self, text: str) -> list[str]: ...


class FMMSegmenter:
    """Segmenter backed by :func:`fmm_segment`."""

    def __init__(self, lexicon: Lexicon | None = None):
        self.lexicon = lexicon if lexicon is not None else Lexicon(frozenset(), 0)

    def segment(self, text: str) -> list[str]:
        return fmm_segment(text, self.lexicon)

    def __repr__(self) -> str:
        return f"FMMSegmenter({len(self.lexicon)} entries)"


class WhitespaceSegmenter:
    """Segmenter for pre-segmented text whose tokens are separated by spaces.

    Lets the output of any external segmenter be fed through the pipeline.
    """

    def segment(self, text: str) -> list[str]:
        return text.split()

    def __repr__(self) -> str:
        return "WhitespaceSegmenter()"
