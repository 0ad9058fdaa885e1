"""Frozen word vectors plus the two binary inter-sentence features.

Each token's embedding may be augmented with a match bit (the same
surface form occurs in the other sentence) and a paraphrase bit (some
indexed paraphrase of it occurs in the other sentence), in that order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import SentencePair, Token
from .errors import DataError
from .ppdb import ParaphraseIndex, has_paraphrase_in

GLOVE_DIM = 300


class FeatureMode(Enum):
    BASE = "base"
    MA = "ma"
    PR = "pr"
    MAPR = "mapr"

    @property
    def uses_ma(self) -> bool:
        return self in (FeatureMode.MA, FeatureMode.MAPR)

    @property
    def uses_pr(self) -> bool:
        return self in (FeatureMode.PR, FeatureMode.MAPR)

    @property
    def num_feature_bits(self) -> int:
        return int(self.uses_ma) + int(self.uses_pr)

    def input_width(self, dim: int = GLOVE_DIM) -> int:
        return dim + self.num_feature_bits


@dataclass
class EmbeddingTable:
    """Token to fixed vector map; never mutated after load.

    Lookups for unknown tokens fall back to the all-zeros vector, so the
    match bits still carry signal for out-of-vocabulary words.
    """

    dim: int
    vectors: dict[Token, np.ndarray]

    def __contains__(self, token: Token) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def embed(self, token: Token) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec

    def content_hash(self) -> int:
        """Order-independent digest of the full table, for frozen-table checks."""
        total = 0
        for token, vec in self.vectors.items():
            total ^= zlib.crc32(token.encode("utf-8") + b"\x00" + vec.tobytes())
        return total


def load_glove(
    path: str,
    restrict_vocab: set[Token] | frozenset[Token] | None = None,
    dim: int = GLOVE_DIM,
) -> EmbeddingTable:
    """Load whitespace-separated ``word v1 ... vDIM`` lines.

    The vector is the last ``dim`` fields; anything before it is the word
    (some distributions contain tokens with internal spaces). First
    occurrence of a word wins. A line with too few fields or a non-numeric
    vector entry raises DataError naming the line.
    """
    vectors: dict[Token, np.ndarray] = {}
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) < dim + 1:
                raise DataError(
                    f"line {lineno}: expected a word plus {dim} values, got {len(parts)} fields"
                )
            word = " ".join(parts[: len(parts) - dim])
            if restrict_vocab is not None and word not in restrict_vocab:
                continue
            if word in vectors:
                continue
            try:
                vec = np.array([float(v) for v in parts[len(parts) - dim :]])
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric vector entry") from None
            vectors[word] = vec
    return EmbeddingTable(dim=dim, vectors=vectors)


def ma_feature(t: Token, other_tokens: set[Token] | frozenset[Token]) -> int:
    """1 iff t's exact surface form occurs in the other sentence's token set."""
    return int(t in other_tokens)


def pr_feature(
    t: Token, other_tokens: set[Token] | frozenset[Token], index: ParaphraseIndex
) -> int:
    """1 iff some paraphrase of t occurs in the other sentence's token set."""
    return has_paraphrase_in(index, t, other_tokens)


@dataclass
class AugmentedSentence:
    """Token list plus its per-token input matrix (embedding + feature bits)."""

    tokens: list[Token]
    matrix: np.ndarray  # (len(tokens), width)

    def __len__(self) -> int:
        return len(self.tokens)


def _augment_one(
    tokens: list[Token],
    other: frozenset[Token],
    table: EmbeddingTable,
    index: ParaphraseIndex | None,
    mode: FeatureMode,
) -> AugmentedSentence:
    width = mode.input_width(table.dim)
    matrix = np.zeros((len(tokens), width))
    for row, token in enumerate(tokens):
        vec = table.vectors.get(token)
        if vec is not None:
            matrix[row, : table.dim] = vec
        col = table.dim
        if mode.uses_ma:
            matrix[row, col] = ma_feature(token, other)
            col += 1
        if mode.uses_pr:
            matrix[row, col] = pr_feature(token, other, index)
    return AugmentedSentence(tokens=list(tokens), matrix=matrix)


def augment_pair(
    pair: SentencePair,
    table: EmbeddingTable,
    index: ParaphraseIndex | None,
    mode: FeatureMode,
) -> tuple[AugmentedSentence, AugmentedSentence]:
    """Build both sentences' input matrices for the given feature mode.

    Bit columns are appended after the embedding in the order
    [match, paraphrase]; each sentence's bits are computed against the
    other sentence's token set.
    """
    if mode.uses_pr and index is None:
        raise ValueError("paraphrase feature requested but no paraphrase index given")
    set1 = pair.s1.token_set()
    set2 = pair.s2.token_set()
    return (
        _augment_one(pair.s1.tokens, set2, table, index, mode),
        _augment_one(pair.s2.tokens, set1, table, index, mode),
    )
