"""Shared test helpers: fixture paths, tiny embeddings, optional real data."""

import os
from pathlib import Path

import numpy as np
import pytest

from regmapr.features import EmbeddingTable

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def random_table(words, dim: int, seed: int = 0) -> EmbeddingTable:
    """Deterministic random embedding table over the given vocabulary."""
    rng = np.random.default_rng(seed)
    vectors = {w: rng.normal(0.0, 0.5, size=dim) for w in words}
    return EmbeddingTable(dim=dim, vectors=vectors)


POS_VOCAB = [f"p{i}" for i in range(12)]
NEG_VOCAB_1 = [f"q{i}" for i in range(12)]
NEG_VOCAB_2 = [f"r{i}" for i in range(12)]
SYNTH_VOCAB = POS_VOCAB + NEG_VOCAB_1 + NEG_VOCAB_2


def separable_pairs(n: int, rng) -> list:
    """Binary pairs whose exact-match bit alone decides the label.

    Positives repeat one sentence twice (every token matches); negatives
    draw the two sides from disjoint vocabularies (no token matches).
    """
    from regmapr.corpus import Sentence, SentencePair, TaskKind

    pairs = []
    for k in range(n):
        if k % 2 == 0:
            toks = rng.choice(POS_VOCAB, size=3, replace=False)
            s = " ".join(toks)
            pairs.append(
                SentencePair(
                    s1=Sentence.from_raw(s),
                    s2=Sentence.from_raw(s),
                    gold=1,
                    task=TaskKind.PARAPHRASE2,
                )
            )
        else:
            t1 = " ".join(rng.choice(NEG_VOCAB_1, size=3, replace=False))
            t2 = " ".join(rng.choice(NEG_VOCAB_2, size=3, replace=False))
            pairs.append(
                SentencePair(
                    s1=Sentence.from_raw(t1),
                    s2=Sentence.from_raw(t2),
                    gold=0,
                    task=TaskKind.PARAPHRASE2,
                )
            )
    return pairs


def data_dir() -> Path | None:
    """Directory holding real benchmark data, if the user provided one.

    Checked in order: $REGMAPR_DATA, then ./data next to the repo root.
    """
    env = os.environ.get("REGMAPR_DATA")
    if env:
        p = Path(env)
        if p.is_dir():
            return p
    p = Path(__file__).parent.parent / "data"
    if p.is_dir():
        return p
    return None


def require_data_file(*names: str) -> Path:
    """First existing file among names inside the data dir, else skip."""
    root = data_dir()
    if root is None:
        pytest.skip("real benchmark data not available (set REGMAPR_DATA or create ./data)")
    for name in names:
        p = root / name
        if p.is_file():
            return p
    pytest.skip(f"none of {names} found under {root}")
