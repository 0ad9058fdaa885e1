"""Class partitioning and per-feature on-rate comparisons."""

import json

import pytest

from regmapr.analysis import (
    FEATURE_ORDER,
    analyze,
    feature_counts,
    feature_proportion,
    partition,
    relative_difference,
    reports_to_tsv,
)
from regmapr.corpus import Dataset, Sentence, SentencePair, TaskKind, load_dataset
from regmapr.ppdb import build_index

from conftest import fixture_path


def pair(s1, s2, gold, task):
    return SentencePair(
        s1=Sentence.from_raw(s1), s2=Sentence.from_raw(s2), gold=gold, task=task
    )


class TestPartition:
    def test_binary(self):
        ds = Dataset(
            name="t",
            split="train",
            task=TaskKind.PARAPHRASE2,
            pairs=[
                pair("a b", "a c", 1, TaskKind.PARAPHRASE2),
                pair("a b", "d e", 0, TaskKind.PARAPHRASE2),
                pair("a", "a", 1, TaskKind.PARAPHRASE2),
            ],
        )
        pos, neg = partition(ds)
        assert [p.gold for p in pos] == [1, 1]
        assert [p.gold for p in neg] == [0]

    def test_threeway_drops_neutral(self):
        task = TaskKind.ENTAILMENT3
        ds = Dataset(
            name="t",
            split="train",
            task=task,
            pairs=[
                pair("a", "b", "entailment", task),
                pair("a", "b", "neutral", task),
                pair("a", "b", "contradiction", task),
                pair("a", "b", "neutral", task),
            ],
        )
        pos, neg = partition(ds)
        assert len(pos) == 1 and pos[0].gold == "entailment"
        assert len(neg) == 1 and neg[0].gold == "contradiction"

    def test_relatedness_mean_split(self):
        task = TaskKind.RELATEDNESS
        ds = Dataset(
            name="t",
            split="train",
            task=task,
            pairs=[
                pair("a", "b", 0.1, task),
                pair("a", "b", 0.2, task),
                pair("a", "b", 0.9, task),
            ],
        )
        # mean 0.4: the 0.9 pair is positive, others negative
        pos, neg = partition(ds)
        assert [p.gold for p in pos] == [0.9]
        assert sorted(p.gold for p in neg) == [0.1, 0.2]

    def test_relatedness_boundary_is_positive(self):
        task = TaskKind.RELATEDNESS
        ds = Dataset(
            name="t",
            split="train",
            task=task,
            pairs=[pair("a", "b", 0.5, task), pair("a", "b", 0.5, task)],
        )
        pos, neg = partition(ds)
        assert len(pos) == 2 and len(neg) == 0

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            partition(
                Dataset(name="t", split="train", pairs=[], task=TaskKind.PARAPHRASE2)
            )


class TestCountsAndProportions:
    def test_hand_counted_example(self):
        # "the cat" / "the dog": MA fires on both "the" tokens only.
        pairs = [pair("the cat", "the dog", 1, TaskKind.PARAPHRASE2)]
        on, total = feature_counts(pairs, "MA", None)
        assert (on, total) == (2, 4)
        assert feature_proportion(pairs, "MA") == 0.5

    def test_counts_accumulate_over_pairs(self):
        pairs = [
            pair("a a", "a", 1, TaskKind.PARAPHRASE2),  # all 3 tokens match
            pair("b c", "d e", 1, TaskKind.PARAPHRASE2),  # none match
        ]
        assert feature_counts(pairs, "MA", None) == (3, 7)

    def test_pr_requires_index(self):
        index = build_index(fixture_path("analysis_ppdb.txt"))
        pairs = [pair("the cat", "the feline", 1, TaskKind.PARAPHRASE2)]
        on, total = feature_counts(pairs, "PR", index)
        # cat->feline and feline->cat both fire; "the" matches exactly, not via
        # the table, so PR stays off for it.
        assert (on, total) == (2, 4)

    def test_mapr_is_conjunction(self):
        index = build_index(fixture_path("analysis_ppdb.txt"))
        # "cat cat" vs "cat feline": both first-side "cat" tokens exact-match
        # and paraphrase-match (feline sits opposite). Second-side "cat" only
        # exact-matches; its sole paraphrase "feline" is not in {cat}.
        pairs = [pair("cat cat", "cat feline", 1, TaskKind.PARAPHRASE2)]
        ma = feature_counts(pairs, "MA", index)
        pr = feature_counts(pairs, "PR", index)
        both = feature_counts(pairs, "MAPR", index)
        assert ma == (3, 4)
        assert pr == (3, 4)
        assert both == (2, 4)
        assert both[0] <= min(ma[0], pr[0])

    def test_unknown_feature(self):
        pairs = [pair("a", "a", 1, TaskKind.PARAPHRASE2)]
        with pytest.raises(ValueError):
            feature_counts(pairs, "XX", None)

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError):
            feature_proportion([], "MA")


class TestRelativeDifference:
    def test_examples(self):
        assert relative_difference(0.3, 0.1) == pytest.approx(1.0)
        assert relative_difference(0.1, 0.3) == pytest.approx(-1.0)
        assert relative_difference(0.2, 0.2) == 0.0

    def test_extremes(self):
        assert relative_difference(0.5, 0.0) == pytest.approx(2.0)
        assert relative_difference(0.0, 0.5) == pytest.approx(-2.0)

    def test_bounds_hold_generally(self):
        import itertools

        grid = [0.0, 0.01, 0.1, 0.5, 0.9, 1.0]
        for a, b in itertools.product(grid, grid):
            if a + b == 0:
                continue
            assert -2.0 <= relative_difference(a, b) <= 2.0

    def test_antisymmetry(self):
        assert relative_difference(0.7, 0.2) == -relative_difference(0.2, 0.7)

    def test_both_zero_undefined(self):
        with pytest.raises(ValueError):
            relative_difference(0.0, 0.0)


@pytest.fixture(scope="module")
def six_pair_reports():
    ds = load_dataset(
        fixture_path("analysis_six.jsonl"), "pairs-jsonl", TaskKind.PARAPHRASE2
    )
    index = build_index(fixture_path("analysis_ppdb.txt"))
    return analyze(ds, index)


@pytest.fixture(scope="module")
def expected():
    with open(fixture_path("analysis_six_expected.json")) as fh:
        return json.load(fh)


class TestAnalyze:
    def test_feature_order(self, six_pair_reports):
        assert tuple(r.feature for r in six_pair_reports) == FEATURE_ORDER
        assert FEATURE_ORDER == ("PR", "MA", "MAPR")

    def test_rates_match_hand_tally(self, six_pair_reports, expected):
        for rep in six_pair_reports:
            want = expected[rep.feature]
            assert rep.r_pos == pytest.approx(
                want["R_P"][0] / want["R_P"][1], abs=1e-12
            ), rep.feature
            assert rep.r_neg == pytest.approx(
                want["R_N"][0] / want["R_N"][1], abs=1e-12
            ), rep.feature
            assert rep.r == pytest.approx(
                want["R"][0] / want["R"][1], abs=1e-12
            ), rep.feature

    def test_counts_match_hand_tally(self, six_pair_reports, expected):
        for rep in six_pair_reports:
            want = expected[rep.feature]["counts"]
            assert rep.pos_on == want["pos_on"]
            assert rep.pos_total == want["pos_total"]
            assert rep.neg_on == want["neg_on"]
            assert rep.neg_total == want["neg_total"]

    def test_exact_match_feature_separates_classes(self, six_pair_reports):
        by_name = {r.feature: r for r in six_pair_reports}
        assert by_name["MA"].r > 0  # more exact matches among positives
        assert -2.0 <= by_name["PR"].r <= 2.0

    def test_to_dict_keys(self, six_pair_reports):
        d = six_pair_reports[0].to_dict()
        assert set(d) == {"feature", "R_P", "R_N", "R", "counts"}
        assert set(d["counts"]) == {"pos_on", "pos_total", "neg_on", "neg_total"}

    def test_all_negative_dataset_rejected(self):
        ds = Dataset(
            name="t",
            split="train",
            task=TaskKind.PARAPHRASE2,
            pairs=[pair("a", "b", 0, TaskKind.PARAPHRASE2)],
        )
        with pytest.raises(ValueError):
            analyze(ds)

    def test_missing_index_rejected(self):
        ds = Dataset(
            name="t",
            split="train",
            task=TaskKind.PARAPHRASE2,
            pairs=[
                pair("the cat", "the feline", 1, TaskKind.PARAPHRASE2),
                pair("a b", "c d", 0, TaskKind.PARAPHRASE2),
            ],
        )
        with pytest.raises(ValueError, match="paraphrase index"):
            analyze(ds, index=None)
        # MA alone never needs the table: only the two "the" tokens match.
        assert feature_counts(ds.pairs, "MA", None) == (2, 8)


class TestTsv:
    def test_format(self, tmp_path):
        ds = load_dataset(
            fixture_path("analysis_six.jsonl"), "pairs-jsonl", TaskKind.PARAPHRASE2
        )
        index = build_index(fixture_path("analysis_ppdb.txt"))
        text = reports_to_tsv(analyze(ds, index))
        lines = text.splitlines()
        assert lines[0] == "feature\tR_P\tR_N\tR"
        assert len(lines) == 4
        assert text.endswith("\n")
        for line, feature in zip(lines[1:], FEATURE_ORDER):
            cells = line.split("\t")
            assert cells[0] == feature
            # repr round-trips to the exact float
            for cell in cells[1:]:
                float(cell)

    def test_values_roundtrip_exactly(self):
        ds = load_dataset(
            fixture_path("analysis_six.jsonl"), "pairs-jsonl", TaskKind.PARAPHRASE2
        )
        index = build_index(fixture_path("analysis_ppdb.txt"))
        reports = analyze(ds, index)
        lines = reports_to_tsv(reports).splitlines()[1:]
        for line, rep in zip(lines, reports):
            _, rp, rn, r = line.split("\t")
            assert float(rp) == rep.r_pos
            assert float(rn) == rep.r_neg
            assert float(r) == rep.r
