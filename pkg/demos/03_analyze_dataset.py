"""
How predictive are the match bits?
==================================

Partitions a toy dataset by label and compares each feature's on-rate
between the classes. A relative difference near +2 means the feature
almost only fires on positives; near 0 means it carries no signal.
"""

import os
import tempfile

from regmapr.analysis import analyze, reports_to_tsv
from regmapr.corpus import Dataset, Sentence, SentencePair, TaskKind
from regmapr.ppdb import build_index

raw = [
    # paraphrase pairs: high overlap, some of it only via the table
    ("the cat runs", "the feline runs", 1),
    ("a dog is fast", "a dog canine quick", 1),
    ("dogs bark", "dogs bark", 1),
    # non-paraphrases: little to no overlap
    ("the cat sleeps", "the feline cat", 0),
    ("fast cars", "green trees grow", 0),
    ("a dog", "the canine barks", 0),
]
pairs = [
    SentencePair(
        s1=Sentence.from_raw(a),
        s2=Sentence.from_raw(b),
        gold=g,
        task=TaskKind.PARAPHRASE2,
    )
    for a, b, g in raw
]
dataset = Dataset(name="toy", split="train", pairs=pairs, task=TaskKind.PARAPHRASE2)

lines = [
    "[NN] ||| cat ||| feline ||| 1.0 ||| a",
    "[NN] ||| feline ||| cat ||| 1.0 ||| a",
    "[NN] ||| dog ||| canine ||| 1.0 ||| a",
    "[NN] ||| dog ||| hound ||| 1.0 ||| a",
    "[NN] ||| canine ||| dog ||| 1.0 ||| a",
    "[JJ] ||| fast ||| quick ||| 1.0 ||| a",
]
fd, path = tempfile.mkstemp(suffix=".txt")
with os.fdopen(fd, "w") as fh:
    fh.write("\n".join(lines) + "\n")
index = build_index(path)
os.unlink(path)

reports = analyze(dataset, index)
for rep in reports:
    print(
        f"{rep.feature:>4}: on-rate {rep.r_pos:.3f} in positives "
        f"({rep.pos_on}/{rep.pos_total}), {rep.r_neg:.3f} in negatives "
        f"({rep.neg_on}/{rep.neg_total}), relative difference {rep.r:+.3f}"
    )

# The same table in the plot-ready format the command line emits.
print()
print(reports_to_tsv(reports), end="")
