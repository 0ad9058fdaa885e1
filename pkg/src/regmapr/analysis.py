"""How much signal the two match bits carry, measured per dataset.

Pairs are split into a positive and a negative class by their gold
labels, then each binary feature's on-rate is compared between classes.
The relative difference of the two rates summarizes a feature's
predictive power in a single number in (-2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Dataset, SentencePair, TaskKind
from .features import ma_feature, pr_feature
from .ppdb import ParaphraseIndex

FEATURE_ORDER = ("PR", "MA", "MAPR")


def partition(dataset: Dataset) -> tuple[list[SentencePair], list[SentencePair]]:
    """Split a dataset into positive and negative pairs by gold label.

    Binary: label 1 vs 0. Three-way: entailment vs contradiction,
    neutral pairs dropped. Relatedness: at or above the split mean is
    positive.
    """
    if not dataset.pairs:
        raise ValueError("cannot partition an empty dataset")
    task = dataset.task
    if task is TaskKind.PARAPHRASE2:
        pos = [p for p in dataset.pairs if p.gold == 1]
        neg = [p for p in dataset.pairs if p.gold == 0]
    elif task is TaskKind.ENTAILMENT3:
        pos = [p for p in dataset.pairs if p.gold == "entailment"]
        neg = [p for p in dataset.pairs if p.gold == "contradiction"]
    else:
        mean = sum(p.gold for p in dataset.pairs) / len(dataset.pairs)
        pos = [p for p in dataset.pairs if p.gold >= mean]
        neg = [p for p in dataset.pairs if p.gold < mean]
    return pos, neg


def _feature_bit(feature: str, token, other_tokens, index) -> int:
    if feature == "MA":
        return ma_feature(token, other_tokens)
    if feature not in ("PR", "MAPR"):
        raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURE_ORDER}")
    if index is None:
        raise ValueError(f"feature {feature} needs a paraphrase index")
    if feature == "PR":
        return pr_feature(token, other_tokens, index)
    return ma_feature(token, other_tokens) & pr_feature(token, other_tokens, index)


def feature_counts(
    pairs: list[SentencePair], feature: str, index: ParaphraseIndex | None
) -> tuple[int, int]:
    """(tokens with the feature on, total tokens) over both sentences of each pair."""
    on = 0
    total = 0
    for pair in pairs:
        set1 = pair.s1.token_set()
        set2 = pair.s2.token_set()
        for tok in pair.s1.tokens:
            on += _feature_bit(feature, tok, set2, index)
        for tok in pair.s2.tokens:
            on += _feature_bit(feature, tok, set1, index)
        total += len(pair.s1.tokens) + len(pair.s2.tokens)
    return on, total


def feature_proportion(
    pairs: list[SentencePair], feature: str, index: ParaphraseIndex | None = None
) -> float:
    if not pairs:
        raise ValueError("feature proportion over an empty pair list is undefined")
    on, total = feature_counts(pairs, feature, index)
    if total == 0:
        raise ValueError("feature proportion undefined: no tokens in the pair list")
    return on / total


def relative_difference(r_pos: float, r_neg: float) -> float:
    """(r_pos - r_neg) over the mean of the two; bounded by (-2, 2)."""
    if r_pos + r_neg == 0.0:
        raise ValueError("relative difference undefined when both proportions are zero")
    return (r_pos - r_neg) / ((r_pos + r_neg) / 2.0)


@dataclass
class FeatureReport:
    feature: str
    r_pos: float  # on-rate within positive pairs
    r_neg: float  # on-rate within negative pairs
    r: float  # relative difference of the two rates
    pos_on: int
    pos_total: int
    neg_on: int
    neg_total: int

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "R_P": self.r_pos,
            "R_N": self.r_neg,
            "R": self.r,
            "counts": {
                "pos_on": self.pos_on,
                "pos_total": self.pos_total,
                "neg_on": self.neg_on,
                "neg_total": self.neg_total,
            },
        }


def analyze(dataset: Dataset, index: ParaphraseIndex | None = None) -> list[FeatureReport]:
    """One report per feature, in PR, MA, MAPR order, from a single partition."""
    pos, neg = partition(dataset)
    if not pos:
        raise ValueError("positive class is empty; nothing to analyze")
    if not neg:
        raise ValueError("negative class is empty; nothing to analyze")
    reports = []
    for feature in FEATURE_ORDER:
        pos_on, pos_total = feature_counts(pos, feature, index)
        neg_on, neg_total = feature_counts(neg, feature, index)
        if pos_total == 0 or neg_total == 0:
            raise ValueError("a class has no tokens; nothing to analyze")
        r_pos = pos_on / pos_total
        r_neg = neg_on / neg_total
        reports.append(
            FeatureReport(
                feature=feature,
                r_pos=r_pos,
                r_neg=r_neg,
                r=relative_difference(r_pos, r_neg),
                pos_on=pos_on,
                pos_total=pos_total,
                neg_on=neg_on,
                neg_total=neg_total,
            )
        )
    return reports


def reports_to_tsv(reports: list[FeatureReport]) -> str:
    """Plot-ready table: feature, R_P, R_N, R. Values keep full precision."""
    lines = ["feature\tR_P\tR_N\tR"]
    for rep in reports:
        lines.append(f"{rep.feature}\t{rep.r_pos!r}\t{rep.r_neg!r}\t{rep.r!r}")
    return "\n".join(lines) + "\n"
