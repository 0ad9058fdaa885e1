"""Paraphrase index construction, lookups, and size statistics."""

import numpy as np
import pytest

from regmapr.errors import DataError
from regmapr.ppdb import (
    ParaphraseIndex,
    build_index,
    has_paraphrase_in,
    median_paraphrase_count,
    paraphrase_histogram,
    paraphrases,
)

from conftest import fixture_path


def brute_force_hit(index: ParaphraseIndex, t: str, other: set) -> int:
    """Reference lookup: scan the whole entry, no short-circuit tricks."""
    hits = 0
    for para in index.map.get(t, set()):
        if para in other:
            hits += 1
    return int(hits > 0)


class TestBuildIndex:
    def test_single_line(self, tmp_path):
        p = tmp_path / "one.txt"
        p.write_text("[NN] ||| car ||| automobile ||| feats ||| align\n")
        idx = build_index(str(p))
        assert idx.map == {"car": {"automobile"}}
        assert idx.pair_count == 1
        assert idx.word_count == 1

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.txt"
        p.write_text("")
        idx = build_index(str(p))
        assert idx.word_count == 0
        assert idx.pair_count == 0

    def test_tiny_fixture(self):
        idx = build_index(fixture_path("tiny_ppdb.txt"))
        assert paraphrases(idx, "car") == {"automobile", "auto"}
        assert paraphrases(idx, "auto") == {"car"}  # lowercased from mixed case
        assert paraphrases(idx, "running") == {"runs"}
        assert paraphrases(idx, "fast") == set()  # self-pair dropped
        assert paraphrases(idx, "zebra") == set()
        assert idx.word_count == 3
        assert idx.pair_count == 4
        assert idx.skipped_multiword == 1

    def test_symmetrize_adds_reverse(self):
        idx = build_index(fixture_path("tiny_ppdb.txt"), symmetrize=True)
        for source, entry in idx.map.items():
            for target in entry:
                assert source in idx.map[target]
        assert "automobile" in idx.map
        assert paraphrases(idx, "runs") == {"running"}

    def test_too_few_fields_names_line(self):
        with pytest.raises(DataError, match="line 2"):
            build_index(fixture_path("bad_ppdb.txt"))

    def test_empty_word_raises(self, tmp_path):
        p = tmp_path / "blank.txt"
        p.write_text("[NN] |||  ||| automobile ||| x\n")
        with pytest.raises(DataError, match="line 1"):
            build_index(str(p))

    def test_missing_file(self):
        with pytest.raises(DataError, match="cannot read"):
            build_index("/nonexistent/ppdb.txt")

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "gaps.txt"
        p.write_text("\n[NN] ||| car ||| auto ||| x\n\n")
        idx = build_index(str(p))
        assert idx.pair_count == 1


class TestLookups:
    def test_hit(self):
        idx = ParaphraseIndex.from_pairs([("running", "runs"), ("running", "jogging")])
        assert has_paraphrase_in(idx, "running", {"a", "man", "runs"}) == 1

    def test_miss(self):
        idx = ParaphraseIndex.from_pairs([("running", "runs")])
        assert has_paraphrase_in(idx, "running", {"a", "dog", "barks"}) == 0

    def test_unknown_word(self):
        idx = ParaphraseIndex.from_pairs([("running", "runs")])
        assert has_paraphrase_in(idx, "zebra", {"runs"}) == 0

    def test_directedness(self):
        idx = ParaphraseIndex.from_pairs([("car", "auto")])
        assert has_paraphrase_in(idx, "car", {"auto"}) == 1
        assert has_paraphrase_in(idx, "auto", {"car"}) == 0

    def test_random_queries_match_brute_force(self):
        rng = np.random.default_rng(42)
        vocab = [f"w{i}" for i in range(60)]
        pairs = []
        for _ in range(300):
            s, t = rng.choice(len(vocab), size=2, replace=False)
            pairs.append((vocab[s], vocab[t]))
        idx = ParaphraseIndex.from_pairs(pairs)
        for _ in range(1000):
            t = vocab[rng.integers(len(vocab))]
            size = int(rng.integers(0, 12))
            other = {vocab[i] for i in rng.choice(len(vocab), size=size, replace=False)}
            assert has_paraphrase_in(idx, t, other) == brute_force_hit(idx, t, other)

    def test_frozen_set_accepted(self):
        idx = ParaphraseIndex.from_pairs([("a", "b")])
        assert has_paraphrase_in(idx, "a", frozenset({"b"})) == 1


class TestStats:
    def test_histogram_example(self):
        idx = ParaphraseIndex()
        idx.map = {
            "a": {f"p{i}" for i in range(1)},
            "b": {f"p{i}" for i in range(2)},
            "c": {f"p{i}" for i in range(150)},
        }
        assert paraphrase_histogram(idx, 100) == [(1, 2), (101, 1)]

    def test_histogram_counts_sum_to_word_count(self):
        rng = np.random.default_rng(7)
        idx = ParaphraseIndex()
        for i in range(200):
            size = int(rng.integers(1, 40))
            idx.map[f"w{i}"] = {f"p{j}" for j in range(size)}
        for bw in (1, 3, 10, 100):
            hist = paraphrase_histogram(idx, bw)
            assert sum(c for _, c in hist) == idx.word_count
            # Bin starts advance by exactly bin_width.
            starts = [s for s, _ in hist]
            assert starts == [1 + k * bw for k in range(len(starts))]

    def test_histogram_empty(self):
        assert paraphrase_histogram(ParaphraseIndex(), 100) == []

    def test_histogram_bad_width(self):
        with pytest.raises(ValueError):
            paraphrase_histogram(ParaphraseIndex(), 0)

    def test_median_odd_even(self):
        idx = ParaphraseIndex()
        idx.map = {"a": {"x"}, "b": {"x", "y"}, "c": {"x", "y", "z"}}
        assert median_paraphrase_count(idx) == 2.0
        idx.map["d"] = {"x", "y", "z", "w"}
        assert median_paraphrase_count(idx) == 2.5

    def test_median_empty_raises(self):
        with pytest.raises(ValueError):
            median_paraphrase_count(ParaphraseIndex())


class TestInsertSemantics:
    def test_self_pair_dropped(self):
        idx = ParaphraseIndex()
        idx.insert("same", "same")
        assert idx.word_count == 0

    def test_duplicate_insert_idempotent(self):
        idx = ParaphraseIndex()
        idx.insert("a", "b")
        idx.insert("a", "b")
        assert idx.pair_count == 1
