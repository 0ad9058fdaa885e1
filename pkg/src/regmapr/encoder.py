"""Max-pooled bidirectional LSTM over augmented token vectors.

Forward and backward passes are written out by hand on numpy arrays.
Sentences are processed in padded batches; valid tokens are front-aligned
per row, the reverse direction runs on an in-length reversal of each row,
and padded positions are excluded from the max-pool (their gradients are
exactly zero).

Regularization follows the weight-drop scheme for recurrent nets: one
locked input mask per sentence reused at every timestep, and one
DropConnect sample of the hidden-to-hidden weights per forward pass.
Both use inverted scaling, so evaluation is a plain unscaled pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LstmDirectionParams:
    """Weights for one direction; gate rows ordered [input, forget, cell, output]."""

    W_x: np.ndarray  # (4H, D)
    W_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[1]

    @property
    def input_size(self) -> int:
        return self.W_x.shape[1]

    def check_shapes(self) -> None:
        H, D = self.hidden_size, self.input_size
        if self.W_x.shape != (4 * H, D) or self.W_h.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ValueError(
                f"inconsistent LSTM shapes: W_x {self.W_x.shape}, W_h {self.W_h.shape}, b {self.b.shape}"
            )


@dataclass
class EncoderParams:
    fwd: LstmDirectionParams
    bwd: LstmDirectionParams

    @property
    def hidden_size(self) -> int:
        return self.fwd.hidden_size

    @property
    def input_size(self) -> int:
        return self.fwd.input_size

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {
            "fwd.W_x": self.fwd.W_x,
            "fwd.W_h": self.fwd.W_h,
            "fwd.b": self.fwd.b,
            "bwd.W_x": self.bwd.W_x,
            "bwd.W_h": self.bwd.W_h,
            "bwd.b": self.bwd.b,
        }

    @classmethod
    def zeros(cls, hidden_size: int, input_size: int) -> "EncoderParams":
        def direction():
            return LstmDirectionParams(
                W_x=np.zeros((4 * hidden_size, input_size)),
                W_h=np.zeros((4 * hidden_size, hidden_size)),
                b=np.zeros(4 * hidden_size),
            )

        return cls(fwd=direction(), bwd=direction())


def init_encoder_params(
    rng: np.random.Generator,
    hidden_size: int,
    input_size: int,
    forget_bias: float = 0.0,
) -> EncoderParams:
    """Uniform init in [-1/sqrt(H), 1/sqrt(H)], zero biases.

    forget_bias, when nonzero, is written into the forget-gate rows of
    both direction biases.
    """
    bound = 1.0 / np.sqrt(hidden_size)

    def direction():
        W_x = rng.uniform(-bound, bound, size=(4 * hidden_size, input_size))
        W_h = rng.uniform(-bound, bound, size=(4 * hidden_size, hidden_size))
        b = np.zeros(4 * hidden_size)
        if forget_bias:
            b[hidden_size : 2 * hidden_size] = forget_bias
        return LstmDirectionParams(W_x=W_x, W_h=W_h, b=b)

    return EncoderParams(fwd=direction(), bwd=direction())


@dataclass
class RegularizationConfig:
    """The three dropout rates; all zero reproduces the unregularized model."""

    embed_dropout: float = 0.0  # locked mask on the input vectors
    head_dropout: float = 0.0  # classical dropout after the head's ReLU
    weight_dropout: float = 0.0  # DropConnect on recurrent weights

    def __post_init__(self):
        for name, rate in (
            ("embed_dropout", self.embed_dropout),
            ("head_dropout", self.head_dropout),
            ("weight_dropout", self.weight_dropout),
        ):
            _check_rate(rate, name)


def _check_rate(rate: float, name: str) -> None:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {rate}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_cell(
    x: np.ndarray, h: np.ndarray, c: np.ndarray, p: LstmDirectionParams
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: gates from W_x x + W_h h + b, then the standard update."""
    p.check_shapes()
    H = p.hidden_size
    if x.shape != (p.input_size,) or h.shape != (H,) or c.shape != (H,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, h {h.shape}, c {c.shape} for H={H}, D={p.input_size}"
        )
    z = p.W_x @ x + p.W_h @ h + p.b
    i = _sigmoid(z[:H])
    f = _sigmoid(z[H : 2 * H])
    g = np.tanh(z[2 * H : 3 * H])
    o = _sigmoid(z[3 * H :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _drop_multiplier(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout multipliers: 0 with probability rate, else 1/(1-rate)."""
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def sample_locked_mask(rng: np.random.Generator, width: int, rate: float) -> np.ndarray:
    """One per-sentence input mask, applied unchanged at every timestep."""
    _check_rate(rate, "locked dropout rate")
    return _drop_multiplier(rng, width, rate)


def drop_recurrent(
    p: LstmDirectionParams, rng: np.random.Generator, rate: float
) -> LstmDirectionParams:
    """DropConnect on W_h only; W_x and b are returned untouched."""
    _check_rate(rate, "recurrent dropout rate")
    return LstmDirectionParams(W_x=p.W_x, W_h=p.W_h * _drop_multiplier(rng, p.W_h.shape, rate), b=p.b)


@dataclass
class _DirectionCache:
    i: np.ndarray  # (B, T, H)
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    h: np.ndarray


@dataclass
class RegSample:
    """The realized dropout draws of one forward pass.

    Reusing a sample across calls holds all masks fixed, which the
    finite-difference checks rely on.
    """

    locked: np.ndarray | None  # (B, D) multipliers, None in eval
    weight_fwd: np.ndarray | None  # (4H, H) multipliers
    weight_bwd: np.ndarray | None


@dataclass
class ForwardTape:
    """Everything the exact backward pass needs, plus the pooled output."""

    params: EncoderParams
    mode: str
    lengths: np.ndarray  # (B,)
    x_masked: np.ndarray  # (B, T, D) inputs after the locked mask
    x_rev: np.ndarray  # (B, T, D) per-row in-length reversal of x_masked
    perm: np.ndarray  # (B, T) the reversal index map (an involution)
    sample: RegSample
    wh_fwd: np.ndarray  # recurrent weights as used (dropped in train mode)
    wh_bwd: np.ndarray
    cache_fwd: _DirectionCache
    cache_bwd: _DirectionCache
    pooled: np.ndarray  # (B, 2H)
    argmax: np.ndarray  # (B, 2H) winning timestep per component


def _direction_forward(X: np.ndarray, W_x, W_h_used, b) -> _DirectionCache:
    B, T, _ = X.shape
    H = W_h_used.shape[1]
    pre = X @ W_x.T + b  # (B, T, 4H)
    I = np.empty((B, T, H))
    F = np.empty((B, T, H))
    G = np.empty((B, T, H))
    O = np.empty((B, T, H))
    C = np.empty((B, T, H))
    Hout = np.empty((B, T, H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        z = pre[:, t] + h @ W_h_used.T
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        I[:, t], F[:, t], G[:, t], O[:, t], C[:, t], Hout[:, t] = i, f, g, o, c, h
    return _DirectionCache(i=I, f=F, g=G, o=O, c=C, h=Hout)


def _direction_backward(X: np.ndarray, cache: _DirectionCache, dH: np.ndarray, W_x, W_h_used):
    B, T, H = dH.shape
    dZ = np.empty((B, T, 4 * H))
    dh_carry = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dH[:, t] + dh_carry
        i, f, g, o, c = cache.i[:, t], cache.f[:, t], cache.g[:, t], cache.o[:, t], cache.c[:, t]
        hc = np.tanh(c)
        do = dh * hc
        dc = dc + dh * o * (1.0 - hc * hc)
        c_prev = cache.c[:, t - 1] if t > 0 else np.zeros((B, H))
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dZ[:, t, :H] = di * i * (1.0 - i)
        dZ[:, t, H : 2 * H] = df * f * (1.0 - f)
        dZ[:, t, 2 * H : 3 * H] = dg * (1.0 - g * g)
        dZ[:, t, 3 * H :] = do * o * (1.0 - o)
        dh_carry = dZ[:, t] @ W_h_used
        dc = dc * f
    h_prev = np.concatenate([np.zeros((B, 1, H)), cache.h[:, :-1]], axis=1)
    flat = dZ.reshape(B * T, 4 * H)
    dW_x = flat.T @ X.reshape(B * T, -1)
    dW_h = flat.T @ h_prev.reshape(B * T, H)
    db = flat.sum(axis=0)
    dX = dZ @ W_x
    return dW_x, dW_h, db, dX


def _reversal_perm(lengths: np.ndarray, T: int) -> np.ndarray:
    """Index map reversing the first L entries of each row; fixed on padding."""
    idx = np.broadcast_to(np.arange(T), (len(lengths), T)).copy()
    valid = idx < lengths[:, None]
    rev = lengths[:, None] - 1 - idx
    return np.where(valid, rev, idx)


def _gather_time(X: np.ndarray, perm: np.ndarray) -> np.ndarray:
    if X.ndim == 3:
        return np.take_along_axis(X, perm[:, :, None], axis=1)
    return np.take_along_axis(X, perm, axis=1)


def encode_batch(
    X: np.ndarray,
    lengths,
    p: EncoderParams,
    reg: RegularizationConfig | None = None,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    sample: RegSample | None = None,
) -> tuple[np.ndarray, ForwardTape]:
    """Encode a padded batch of sentences into (B, 2H) pooled vectors.

    X is (B, T, D) with each row's valid tokens front-aligned; lengths
    gives the valid token count per row. In train mode the locked input
    masks and the DropConnect sample are drawn from rng unless a
    pre-drawn `sample` is supplied. Eval mode ignores rng and all rates.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    reg = reg or RegularizationConfig()
    X = np.asarray(X, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.int64)
    B, T, D = X.shape
    if lengths.shape != (B,):
        raise ValueError(f"lengths shape {lengths.shape} does not match batch size {B}")
    if np.any(lengths < 1):
        raise ValueError("every sentence must contain at least one token")
    if np.any(lengths > T):
        raise ValueError("length exceeds padded time dimension")
    if D != p.input_size:
        raise ValueError(f"input width {D} does not match encoder input size {p.input_size}")
    H = p.hidden_size

    if sample is None:
        sample = _draw_sample(reg, mode, rng, B, D, H)
    x_masked = X if sample.locked is None else X * sample.locked[:, None, :]
    wh_fwd = p.fwd.W_h if sample.weight_fwd is None else p.fwd.W_h * sample.weight_fwd
    wh_bwd = p.bwd.W_h if sample.weight_bwd is None else p.bwd.W_h * sample.weight_bwd

    cache_fwd = _direction_forward(x_masked, p.fwd.W_x, wh_fwd, p.fwd.b)
    perm = _reversal_perm(lengths, T)
    x_rev = _gather_time(x_masked, perm)
    cache_bwd = _direction_forward(x_rev, p.bwd.W_x, wh_bwd, p.bwd.b)

    states = np.concatenate([cache_fwd.h, _gather_time(cache_bwd.h, perm)], axis=2)  # (B,T,2H)
    valid = np.arange(T)[None, :] < lengths[:, None]
    masked_states = np.where(valid[:, :, None], states, -np.inf)
    argmax = np.argmax(masked_states, axis=1)  # first max wins ties
    pooled = np.take_along_axis(masked_states, argmax[:, None, :], axis=1)[:, 0, :]

    tape = ForwardTape(
        params=p,
        mode=mode,
        lengths=lengths,
        x_masked=x_masked,
        x_rev=x_rev,
        perm=perm,
        sample=sample,
        wh_fwd=wh_fwd,
        wh_bwd=wh_bwd,
        cache_fwd=cache_fwd,
        cache_bwd=cache_bwd,
        pooled=pooled,
        argmax=argmax,
    )
    return pooled, tape


def _draw_sample(reg, mode, rng, B, D, H) -> RegSample:
    if mode == "eval":
        return RegSample(locked=None, weight_fwd=None, weight_bwd=None)
    locked = None
    weight_fwd = None
    weight_bwd = None
    if reg.embed_dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout requires an rng")
        locked = _drop_multiplier(rng, (B, D), reg.embed_dropout)
    if reg.weight_dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout requires an rng")
        weight_fwd = _drop_multiplier(rng, (4 * H, H), reg.weight_dropout)
        weight_bwd = _drop_multiplier(rng, (4 * H, H), reg.weight_dropout)
    return RegSample(locked=locked, weight_fwd=weight_fwd, weight_bwd=weight_bwd)


def encode_backward_batch(
    tape: ForwardTape, grad_pooled: np.ndarray
) -> tuple[EncoderParams, np.ndarray]:
    """Exact gradients of the pooled outputs w.r.t. parameters and inputs.

    grad_pooled is (B, 2H). Pool gradients are routed only to each
    component's winning timestep; the DropConnect and locked-mask chains
    are applied so the returned parameter gradients are w.r.t. the raw
    weights. Returns (EncoderParams-shaped grads, dX of shape (B, T, D)).
    """
    p = tape.params
    B, T, _ = tape.x_masked.shape
    H = p.hidden_size
    grad_pooled = np.asarray(grad_pooled, dtype=np.float64)
    if grad_pooled.shape != (B, 2 * H):
        raise ValueError(f"gradient shape {grad_pooled.shape} does not match tape ({B}, {2 * H})")

    dStates = np.zeros((B, T, 2 * H))
    np.put_along_axis(dStates, tape.argmax[:, None, :], grad_pooled[:, None, :], axis=1)

    dW_x_f, dW_h_f, db_f, dX_f = _direction_backward(
        tape.x_masked, tape.cache_fwd, dStates[:, :, :H], p.fwd.W_x, tape.wh_fwd
    )
    dH_rev = _gather_time(dStates[:, :, H:], tape.perm)
    dW_x_b, dW_h_b, db_b, dX_r = _direction_backward(
        tape.x_rev, tape.cache_bwd, dH_rev, p.bwd.W_x, tape.wh_bwd
    )
    dX = dX_f + _gather_time(dX_r, tape.perm)
    if tape.sample.locked is not None:
        dX = dX * tape.sample.locked[:, None, :]
    if tape.sample.weight_fwd is not None:
        dW_h_f = dW_h_f * tape.sample.weight_fwd
        dW_h_b = dW_h_b * tape.sample.weight_bwd
    grads = EncoderParams(
        fwd=LstmDirectionParams(W_x=dW_x_f, W_h=dW_h_f, b=db_f),
        bwd=LstmDirectionParams(W_x=dW_x_b, W_h=dW_h_b, b=db_b),
    )
    return grads, dX


def encode(
    sent,
    p: EncoderParams,
    reg: RegularizationConfig | None = None,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    sample: RegSample | None = None,
) -> tuple[np.ndarray, ForwardTape]:
    """Encode a single sentence (AugmentedSentence or a (T, D) matrix)."""
    matrix = sent.matrix if hasattr(sent, "matrix") else np.asarray(sent)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError("encode needs a non-empty (T, D) input matrix")
    pooled, tape = encode_batch(
        matrix[None, :, :], [matrix.shape[0]], p, reg, mode, rng, sample
    )
    return pooled[0], tape


def encode_backward(tape: ForwardTape, grad_pooled: np.ndarray):
    """Single-sentence wrapper around :func:`encode_backward_batch`.

    Accepts a (2H,) gradient for a batch-of-one tape and returns the
    parameter gradients plus the per-token input gradients (T, D).
    """
    grad = np.asarray(grad_pooled, dtype=np.float64)
    if grad.ndim == 1:
        if tape.x_masked.shape[0] != 1:
            raise ValueError("1-D gradient given for a batched tape")
        grads, dX = encode_backward_batch(tape, grad[None, :])
        return grads, dX[0]
    grads, dX = encode_backward_batch(tape, grad)
    return grads, dX


def replay_forward(tape: ForwardTape) -> np.ndarray:
    """Recompute the pooled output from the tape's recorded inputs and weights."""
    p = tape.params
    H = p.hidden_size
    B, T, _ = tape.x_masked.shape
    cache_fwd = _direction_forward(tape.x_masked, p.fwd.W_x, tape.wh_fwd, p.fwd.b)
    cache_bwd = _direction_forward(tape.x_rev, p.bwd.W_x, tape.wh_bwd, p.bwd.b)
    states = np.concatenate([cache_fwd.h, _gather_time(cache_bwd.h, tape.perm)], axis=2)
    valid = np.arange(T)[None, :] < tape.lengths[:, None]
    return np.max(np.where(valid[:, :, None], states, -np.inf), axis=1)
