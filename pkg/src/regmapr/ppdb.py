"""Lexical paraphrase index built from a |||-delimited paraphrase database file.

Each line carries ``POS ||| source ||| target ||| ...``; only the source
and target words are read, lowercased, and inserted as a directed pair.
Scores and any trailing fields are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Token
from .errors import DataError

FIELD_SEP = " ||| "


@dataclass
class ParaphraseIndex:
    """One-to-many map from a word to the set of its paraphrases."""

    map: dict[Token, set[Token]] = field(default_factory=dict)
    skipped_multiword: int = 0

    @property
    def pair_count(self) -> int:
        """Number of directed (word, paraphrase) pairs stored."""
        return sum(len(s) for s in self.map.values())

    @property
    def word_count(self) -> int:
        """Number of distinct source words."""
        return len(self.map)

    def insert(self, source: Token, target: Token) -> None:
        """Insert one directed pair; self-pairs are dropped."""
        if source == target:
            return
        self.map.setdefault(source, set()).add(target)

    @classmethod
    def from_pairs(cls, pairs, symmetrize: bool = False) -> "ParaphraseIndex":
        index = cls()
        for source, target in pairs:
            index.insert(source, target)
            if symmetrize:
                index.insert(target, source)
        return index


def build_index(path: str, symmetrize: bool = False) -> ParaphraseIndex:
    """Parse a lexical paraphrase file into a ParaphraseIndex.

    Lines need at least three |||-delimited fields; entries whose source
    or target contains whitespace (multi-word phrases) are skipped with a
    count. With symmetrize, the reverse of each pair is inserted too.
    """
    index = ParaphraseIndex()
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(FIELD_SEP)
            if len(fields) < 3:
                raise DataError(
                    f"line {lineno}: expected at least 3 '|||'-delimited fields, got {len(fields)}"
                )
            source = fields[1].strip().lower()
            target = fields[2].strip().lower()
            if not source or not target:
                raise DataError(f"line {lineno}: empty source or target word")
            if any(ch.isspace() for ch in source) or any(ch.isspace() for ch in target):
                index.skipped_multiword += 1
                continue
            index.insert(source, target)
            if symmetrize:
                index.insert(target, source)
    return index


def paraphrases(index: ParaphraseIndex, t: Token) -> set[Token]:
    """The paraphrase set of t, empty when t is not indexed."""
    return index.map.get(t, set())


def has_paraphrase_in(index: ParaphraseIndex, t: Token, other: set[Token] | frozenset[Token]) -> int:
    """1 iff any paraphrase of t occurs in ``other``, else 0."""
    entry = index.map.get(t)
    if not entry:
        return 0
    if len(entry) > len(other):
        return int(any(word in entry for word in other))
    return int(any(word in other for word in entry))


def paraphrase_histogram(index: ParaphraseIndex, bin_width: int) -> list[tuple[int, int]]:
    """Bin indexed words by paraphrase-set size.

    Bin k covers sizes [k*bin_width + 1, (k+1)*bin_width]; returns
    (bin_start, count) for every bin up to the largest occupied one, so
    the counts always sum to word_count.
    """
    if bin_width < 1:
        raise ValueError(f"bin_width must be >= 1, got {bin_width}")
    counts: dict[int, int] = {}
    for entry in index.map.values():
        k = (len(entry) - 1) // bin_width
        counts[k] = counts.get(k, 0) + 1
    if not counts:
        return []
    return [(k * bin_width + 1, counts.get(k, 0)) for k in range(max(counts) + 1)]


def median_paraphrase_count(index: ParaphraseIndex) -> float:
    """Median paraphrase-set size over indexed words."""
    sizes = sorted(len(s) for s in index.map.values())
    if not sizes:
        raise ValueError("empty index has no median")
    n = len(sizes)
    mid = n // 2
    if n % 2:
        return float(sizes[mid])
    return (sizes[mid - 1] + sizes[mid]) / 2.0
