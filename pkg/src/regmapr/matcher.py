"""Pair composition and the classification / scoring head.

The two pooled sentence vectors are combined into a single match vector
(asymmetric tasks keep both raw vectors, the symmetric relatedness task
keeps only difference and product terms), then pushed through one
ReLU layer with optional dropout and a linear output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import TaskKind
from .encoder import RegularizationConfig, _drop_multiplier

SCORE_FUNCTIONS = ("clamp", "neg-abs")


def compose_width(task: TaskKind, hidden_size: int) -> int:
    two_h = 2 * hidden_size
    return 2 * two_h if task is TaskKind.RELATEDNESS else 4 * two_h


@dataclass
class ComposeCache:
    task: TaskKind
    h1: np.ndarray
    h2: np.ndarray


def compose(h1: np.ndarray, h2: np.ndarray, task: TaskKind) -> tuple[np.ndarray, ComposeCache]:
    """Build the match vector for a batch of pooled pairs.

    h1, h2: (B, 2H). Blocks are [h1, h2, |h1-h2|, h1*h2] for the
    three-way and binary tasks, [|h1-h2|, h1*h2] for relatedness.
    """
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape or h1.ndim != 2:
        raise ValueError(f"mismatched pooled shapes {h1.shape} vs {h2.shape}")
    diff = np.abs(h1 - h2)
    prod = h1 * h2
    if task is TaskKind.RELATEDNESS:
        v = np.concatenate([diff, prod], axis=1)
    else:
        v = np.concatenate([h1, h2, diff, prod], axis=1)
    return v, ComposeCache(task=task, h1=h1, h2=h2)


def compose_backward(cache: ComposeCache, dv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a match-vector gradient back onto the two pooled vectors.

    The absolute difference uses the sign subgradient with sign(0) = 0.
    """
    h1, h2 = cache.h1, cache.h2
    W = h1.shape[1]
    dv = np.asarray(dv, dtype=np.float64)
    if cache.task is TaskKind.RELATEDNESS:
        d_diff, d_prod = dv[:, :W], dv[:, W:]
        dh1 = np.zeros_like(h1)
        dh2 = np.zeros_like(h2)
    else:
        dh1 = dv[:, :W].copy()
        dh2 = dv[:, W : 2 * W].copy()
        d_diff, d_prod = dv[:, 2 * W : 3 * W], dv[:, 3 * W :]
    s = np.sign(h1 - h2)
    dh1 += d_diff * s + d_prod * h2
    dh2 += -d_diff * s + d_prod * h1
    return dh1, dh2


@dataclass
class HeadParams:
    W1: np.ndarray  # (F, V)
    b1: np.ndarray  # (F,)
    W2: np.ndarray  # (K, F)
    b2: np.ndarray  # (K,)

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def in_width(self) -> int:
        return self.W1.shape[1]

    @property
    def out_width(self) -> int:
        return self.W2.shape[0]

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {"head.W1": self.W1, "head.b1": self.b1, "head.W2": self.W2, "head.b2": self.b2}

    @classmethod
    def zeros(cls, in_width: int, hidden: int, out_width: int) -> "HeadParams":
        return cls(
            W1=np.zeros((hidden, in_width)),
            b1=np.zeros(hidden),
            W2=np.zeros((out_width, hidden)),
            b2=np.zeros(out_width),
        )


def init_head_params(
    rng: np.random.Generator, in_width: int, hidden: int, out_width: int
) -> HeadParams:
    """Per-layer uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    b1 = 1.0 / np.sqrt(in_width)
    b2 = 1.0 / np.sqrt(hidden)
    return HeadParams(
        W1=rng.uniform(-b1, b1, size=(hidden, in_width)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-b2, b2, size=(out_width, hidden)),
        b2=np.zeros(out_width),
    )


@dataclass
class HeadCache:
    params: HeadParams
    v: np.ndarray  # (B, V)
    relu: np.ndarray  # (B, F) post-ReLU activations
    mask: np.ndarray | None  # (B, F) dropout multipliers, None in eval
    dropped: np.ndarray  # (B, F) activations as fed to the output layer


def head_forward(
    v: np.ndarray,
    hp: HeadParams,
    reg: RegularizationConfig | None = None,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, HeadCache]:
    """v (B, V) -> logits/raw score z (B, K) through ReLU + dropout + linear."""
    reg = reg or RegularizationConfig()
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != hp.in_width:
        raise ValueError(f"head input shape {v.shape} does not match width {hp.in_width}")
    a = v @ hp.W1.T + hp.b1
    r = np.maximum(a, 0.0)
    if mask is None and mode == "train" and reg.head_dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout requires an rng")
        mask = _drop_multiplier(rng, r.shape, reg.head_dropout)
    dropped = r if mask is None else r * mask
    z = dropped @ hp.W2.T + hp.b2
    return z, HeadCache(params=hp, v=v, relu=r, mask=mask, dropped=dropped)


def head_backward(cache: HeadCache, dz: np.ndarray) -> tuple[HeadParams, np.ndarray]:
    """Gradients of the head output w.r.t. parameters and the match vector."""
    hp = cache.params
    dz = np.asarray(dz, dtype=np.float64)
    if dz.shape != (cache.v.shape[0], hp.out_width):
        raise ValueError(f"head gradient shape {dz.shape} mismatch")
    dW2 = dz.T @ cache.dropped
    db2 = dz.sum(axis=0)
    dd = dz @ hp.W2
    dr = dd if cache.mask is None else dd * cache.mask
    da = dr * (cache.relu > 0.0)
    dW1 = da.T @ cache.v
    db1 = da.sum(axis=0)
    dv = da @ hp.W1
    grads = HeadParams(W1=dW1, b1=db1, W2=dW2, b2=db2)
    return grads, dv


def relatedness_score(z: np.ndarray, kind: str = "clamp") -> np.ndarray:
    """Map the raw head output to a similarity in (0, 1].

    "clamp": min(exp(z), 1), computed as exp(min(z, 0)).
    "neg-abs": exp(-|z|), a strictly positive alternative peaked at z = 0.
    """
    z = np.asarray(z, dtype=np.float64)
    if kind == "clamp":
        return np.exp(np.minimum(z, 0.0))
    if kind == "neg-abs":
        return np.exp(-np.abs(z))
    raise ValueError(f"unknown score function {kind!r}; expected one of {SCORE_FUNCTIONS}")


def relatedness_score_backward(z: np.ndarray, kind: str = "clamp") -> np.ndarray:
    """d score / d z, elementwise; the clamp boundary at z = 0 takes slope 0."""
    z = np.asarray(z, dtype=np.float64)
    if kind == "clamp":
        return np.where(z < 0.0, np.exp(z), 0.0)
    if kind == "neg-abs":
        return -np.sign(z) * np.exp(-np.abs(z))
    raise ValueError(f"unknown score function {kind!r}; expected one of {SCORE_FUNCTIONS}")
