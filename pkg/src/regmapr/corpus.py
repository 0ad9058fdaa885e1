"""Sentence-pair data model: tokenization, dataset loading, score scaling.

Tokens are plain lowercased strings; two tokens match iff they are equal
as strings, which is exactly the equality the match feature tests.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from enum import Enum

from .errors import DataError

Token = str

_PUNCT = set(string.punctuation)

ENTAILMENT_LABELS = ("entailment", "contradiction", "neutral")


class TaskKind(Enum):
    """The three benchmark task families, fixing the gold-label domain."""

    ENTAILMENT3 = "entailment3"
    PARAPHRASE2 = "paraphrase2"
    RELATEDNESS = "relatedness"

    @property
    def num_classes(self) -> int:
        if self is TaskKind.ENTAILMENT3:
            return 3
        if self is TaskKind.PARAPHRASE2:
            return 2
        return 1


@dataclass(frozen=True)
class Sentence:
    tokens: list[Token]
    raw: str

    @classmethod
    def from_raw(cls, raw: str) -> "Sentence":
        return cls(tokens=tokenize(raw), raw=raw)

    def __len__(self) -> int:
        return len(self.tokens)

    def token_set(self) -> frozenset[Token]:
        return frozenset(self.tokens)


@dataclass(frozen=True)
class SentencePair:
    """Two sentences plus a gold label (class name, 0/1, or unit-interval score)."""

    s1: Sentence
    s2: Sentence
    gold: str | int | float
    task: TaskKind


@dataclass
class Dataset:
    name: str
    split: str
    pairs: list[SentencePair]
    task: TaskKind
    # Original score range for relatedness golds, kept for metric reporting.
    score_range: tuple[float, float] | None = None
    skipped: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.pairs)


def tokenize(text: str) -> list[Token]:
    """Lowercase, split on whitespace, peel ASCII punctuation off chunk ends.

    Leading and trailing punctuation characters become single-character
    tokens in their original order; interior punctuation (hyphens,
    apostrophes) is left alone.
    """
    tokens: list[Token] = []
    for chunk in text.lower().split():
        head: list[Token] = []
        tail: list[Token] = []
        while chunk and chunk[0] in _PUNCT:
            head.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(head)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return tokens


def scale_score(raw: float, source_range: tuple[float, float]) -> float:
    """Linearly map a score from [lo, hi] onto [0, 1]."""
    lo, hi = source_range
    if not lo < hi:
        raise ValueError(f"invalid score range [{lo}, {hi}]")
    if not lo <= raw <= hi:
        raise DataError(f"score {raw!r} outside [{lo}, {hi}]")
    return (raw - lo) / (hi - lo)


def unscale_score(unit: float, source_range: tuple[float, float]) -> float:
    """Inverse of :func:`scale_score`: map a unit-interval score back to [lo, hi]."""
    lo, hi = source_range
    if not lo < hi:
        raise ValueError(f"invalid score range [{lo}, {hi}]")
    if not 0.0 <= unit <= 1.0:
        raise DataError(f"unit score {unit!r} outside [0, 1]")
    return lo + unit * (hi - lo)


def parse_gold(
    label: str | int | float,
    task: TaskKind,
    score_range: tuple[float, float] | None,
) -> str | int | float:
    """Validate a raw label against the task's gold domain.

    Raises DataError on anything outside the domain; relatedness labels
    are scaled through the given source range (None means already unit).
    """
    if task is TaskKind.ENTAILMENT3:
        name = str(label).strip().lower()
        if name not in ENTAILMENT_LABELS:
            raise DataError(f"unknown entailment label {label!r}")
        return name
    if task is TaskKind.PARAPHRASE2:
        text = str(label).strip()
        try:
            value = float(text)
        except ValueError:
            raise DataError(f"unknown paraphrase label {label!r}") from None
        if value not in (0.0, 1.0):
            raise DataError(f"paraphrase label must be 0 or 1, got {label!r}")
        return int(value)
    try:
        score = float(label)
    except (TypeError, ValueError):
        raise DataError(f"relatedness score {label!r} is not a number") from None
    if score_range is not None:
        return scale_score(score, score_range)
    if not 0.0 <= score <= 1.0:
        raise DataError(f"relatedness score {score!r} outside [0, 1] and no score range given")
    return score


def _parse_jsonl_line(line: str, lineno: int) -> tuple[str, str, object]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise DataError(f"line {lineno}: record is not an object")
    for key in ("s1", "s2", "label"):
        if key not in record:
            raise DataError(f"line {lineno}: missing field {key!r}")
    return str(record["s1"]), str(record["s2"]), record["label"]


def _parse_tsv_line(line: str, lineno: int) -> tuple[str, str, object]:
    cols = line.split("\t")
    if len(cols) != 3:
        raise DataError(f"line {lineno}: expected 3 tab-separated columns, got {len(cols)}")
    return cols[0], cols[1], cols[2]


def load_dataset(
    path: str,
    format: str,
    task: TaskKind,
    *,
    name: str = "",
    split: str = "train",
    score_range: tuple[float, float] | None = None,
    skip_bad: bool = False,
) -> Dataset:
    """Load a pairs-jsonl or tsv file into a Dataset, preserving record order.

    Malformed lines and out-of-domain labels raise DataError naming the
    line; with skip_bad, records whose label string is unrecognized are
    dropped (and counted) instead.
    """
    if format not in ("pairs-jsonl", "tsv"):
        raise ValueError(f"unknown format {format!r}")
    parse_line = _parse_jsonl_line if format == "pairs-jsonl" else _parse_tsv_line
    pairs: list[SentencePair] = []
    skipped = 0
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            raw1, raw2, label = parse_line(line, lineno)
            try:
                gold = parse_gold(label, task, score_range)
            except DataError as exc:
                if skip_bad:
                    skipped += 1
                    continue
                raise DataError(f"line {lineno}: {exc}") from None
            pairs.append(
                SentencePair(
                    s1=Sentence.from_raw(raw1),
                    s2=Sentence.from_raw(raw2),
                    gold=gold,
                    task=task,
                )
            )
    return Dataset(
        name=name or path,
        split=split,
        pairs=pairs,
        task=task,
        score_range=score_range,
        skipped=skipped,
    )
