"""
Token match bits on a sentence pair
===================================

Walks one sentence pair through tokenization, a tiny paraphrase index,
and the two binary match features, printing every intermediate step.
"""

import os
import tempfile

from regmapr.corpus import tokenize
from regmapr.features import ma_feature, pr_feature
from regmapr.ppdb import build_index, paraphrases

s1 = "A man is running."
s2 = "A man runs"

t1 = tokenize(s1)
t2 = tokenize(s2)
print(f"s1: {s1!r} -> {t1}")
print(f"s2: {s2!r} -> {t2}")

# A paraphrase file uses ||| -separated fields; only the source and
# target words matter here. "running -> runs" is the pair that will
# light up the second feature below.
lines = [
    "[VB] ||| running ||| runs ||| 1.0 ||| align",
    "[VB] ||| sprinting ||| running ||| 1.0 ||| align",
]
fd, path = tempfile.mkstemp(suffix=".txt")
with os.fdopen(fd, "w") as fh:
    fh.write("\n".join(lines) + "\n")
index = build_index(path)
os.unlink(path)

print(f"\nindexed {index.word_count} words, {index.pair_count} directed pairs")
print(f"paraphrases of 'running': {sorted(paraphrases(index, 'running'))}")

# The exact-match bit asks "does this surface form occur in the other
# sentence?"; the paraphrase bit asks "does any paraphrase of it?".
set2 = frozenset(t2)
print(f"\n{'token':>10}  MA  PR")
for tok in t1:
    print(f"{tok:>10}  {ma_feature(tok, set2)}   {pr_feature(tok, set2, index)}")

# "a" and "man" match exactly, "running" only through the paraphrase
# table, and the trailing period matches nothing at all.
