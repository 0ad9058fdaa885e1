"""Full pair model: shared encoder applied to both sentences, then the head.

Both sentences run through the same encoder parameters, so the backward
pass sums the two encoder gradient contributions. Checkpoints use a
small self-describing binary format (JSON header + raw float64 arrays)
that round-trips bit-for-bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import ENTAILMENT_LABELS, SentencePair, TaskKind
from .errors import DataError
from .features import GLOVE_DIM, EmbeddingTable, FeatureMode, augment_pair
from .matcher import (
    ComposeCache,
    HeadCache,
    HeadParams,
    SCORE_FUNCTIONS,
    compose,
    compose_backward,
    compose_width,
    head_backward,
    head_forward,
    init_head_params,
)
from .encoder import (
    EncoderParams,
    ForwardTape,
    RegSample,
    RegularizationConfig,
    encode_backward_batch,
    encode_batch,
    init_encoder_params,
)

CHECKPOINT_MAGIC = b"regmapr-ckpt-v1"


@dataclass
class ModelConfig:
    task: TaskKind
    feature_mode: FeatureMode = FeatureMode.MAPR
    hidden_size: int = 600
    head_size: int = 600
    embed_dim: int = GLOVE_DIM
    score_fn: str = "clamp"
    reg: RegularizationConfig = field(default_factory=RegularizationConfig)

    def __post_init__(self):
        if self.hidden_size < 1 or self.head_size < 1 or self.embed_dim < 1:
            raise ValueError("model sizes must be positive")
        if self.score_fn not in SCORE_FUNCTIONS:
            raise ValueError(f"score_fn must be one of {SCORE_FUNCTIONS}, got {self.score_fn!r}")

    @property
    def input_width(self) -> int:
        return self.feature_mode.input_width(self.embed_dim)

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "feature_mode": self.feature_mode.value,
            "hidden_size": self.hidden_size,
            "head_size": self.head_size,
            "embed_dim": self.embed_dim,
            "score_fn": self.score_fn,
            "embed_dropout": self.reg.embed_dropout,
            "head_dropout": self.reg.head_dropout,
            "weight_dropout": self.reg.weight_dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            task=TaskKind(d["task"]),
            feature_mode=FeatureMode(d["feature_mode"]),
            hidden_size=int(d["hidden_size"]),
            head_size=int(d["head_size"]),
            embed_dim=int(d["embed_dim"]),
            score_fn=d.get("score_fn", "clamp"),
            reg=RegularizationConfig(
                embed_dropout=float(d.get("embed_dropout", 0.0)),
                head_dropout=float(d.get("head_dropout", 0.0)),
                weight_dropout=float(d.get("weight_dropout", 0.0)),
            ),
        )


@dataclass
class PairModel:
    config: ModelConfig
    encoder: EncoderParams
    head: HeadParams

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = self.encoder.named_arrays()
        out.update(self.head.named_arrays())
        return out


@dataclass
class ModelGrads:
    encoder: EncoderParams
    head: HeadParams

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = self.encoder.named_arrays()
        out.update(self.head.named_arrays())
        return out


def init_model(config: ModelConfig, rng: np.random.Generator) -> PairModel:
    encoder = init_encoder_params(rng, config.hidden_size, config.input_width)
    head = init_head_params(
        rng,
        in_width=compose_width(config.task, config.hidden_size),
        hidden=config.head_size,
        out_width=config.task.num_classes,
    )
    return PairModel(config=config, encoder=encoder, head=head)


@dataclass
class PairBatch:
    """Padded numeric form of a list of pairs, ready for the encoder."""

    x1: np.ndarray  # (B, T1, D)
    len1: np.ndarray
    x2: np.ndarray  # (B, T2, D)
    len2: np.ndarray
    golds: np.ndarray  # int labels, or float targets for relatedness

    @property
    def size(self) -> int:
        return self.x1.shape[0]


def golds_array(pairs: list[SentencePair], task: TaskKind) -> np.ndarray:
    """Numeric targets: class indices for classification, floats for scores."""
    if task is TaskKind.RELATEDNESS:
        return np.array([p.gold for p in pairs], dtype=np.float64)
    if task is TaskKind.ENTAILMENT3:
        return np.array([ENTAILMENT_LABELS.index(p.gold) for p in pairs], dtype=np.int64)
    return np.array([p.gold for p in pairs], dtype=np.int64)


def make_batch(
    pairs: list[SentencePair],
    table: EmbeddingTable,
    index=None,
    feature_mode: FeatureMode = FeatureMode.MAPR,
) -> PairBatch:
    if not pairs:
        raise ValueError("cannot build an empty batch")
    task = pairs[0].task
    width = feature_mode.input_width(table.dim)
    sides1, sides2 = [], []
    for pair in pairs:
        a1, a2 = augment_pair(pair, table, index, feature_mode)
        sides1.append(a1.matrix)
        sides2.append(a2.matrix)
    x1, len1 = _pad_stack(sides1, width)
    x2, len2 = _pad_stack(sides2, width)
    return PairBatch(x1=x1, len1=len1, x2=x2, len2=len2, golds=golds_array(pairs, task))


def _pad_stack(matrices: list[np.ndarray], width: int) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([m.shape[0] for m in matrices], dtype=np.int64)
    T = int(lengths.max())
    out = np.zeros((len(matrices), T, width))
    for b, m in enumerate(matrices):
        out[b, : m.shape[0], :] = m
    return out, lengths


@dataclass
class ModelTape:
    tape1: ForwardTape
    tape2: ForwardTape
    ccache: ComposeCache
    hcache: HeadCache
    z: np.ndarray  # (B, K) head output before any score mapping


def model_forward(
    model: PairModel,
    batch: PairBatch,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ModelTape]:
    """Run both sides through the shared encoder and the head.

    Locked input masks are drawn per sentence (each side separately);
    the DropConnect draw happens once and is shared by both sides, since
    there is only one underlying recurrent weight matrix per direction.
    """
    cfg = model.config
    h1, tape1 = encode_batch(batch.x1, batch.len1, model.encoder, cfg.reg, mode, rng)
    shared = RegSample(
        locked=_fresh_locked(cfg.reg, mode, rng, batch.x2.shape[0], batch.x2.shape[2]),
        weight_fwd=tape1.sample.weight_fwd,
        weight_bwd=tape1.sample.weight_bwd,
    )
    h2, tape2 = encode_batch(
        batch.x2, batch.len2, model.encoder, cfg.reg, mode, rng, sample=shared
    )
    v, ccache = compose(h1, h2, cfg.task)
    z, hcache = head_forward(v, model.head, cfg.reg, mode, rng)
    return z, ModelTape(tape1=tape1, tape2=tape2, ccache=ccache, hcache=hcache, z=z)


def _fresh_locked(reg, mode, rng, B, D):
    if mode != "train" or reg.embed_dropout <= 0.0:
        return None
    if rng is None:
        raise ValueError("train mode with dropout requires an rng")
    from .encoder import _drop_multiplier

    return _drop_multiplier(rng, (B, D), reg.embed_dropout)


def model_backward(model: PairModel, tape: ModelTape, dz: np.ndarray) -> ModelGrads:
    """Combine head, composition and both encoder passes into one gradient."""
    head_grads, dv = head_backward(tape.hcache, dz)
    dh1, dh2 = compose_backward(tape.ccache, dv)
    enc1, _ = encode_backward_batch(tape.tape1, dh1)
    enc2, _ = encode_backward_batch(tape.tape2, dh2)
    enc = EncoderParams.zeros(model.config.hidden_size, model.config.input_width)
    for name in ("fwd", "bwd"):
        a, b, out = getattr(enc1, name), getattr(enc2, name), getattr(enc, name)
        out.W_x += a.W_x + b.W_x
        out.W_h += a.W_h + b.W_h
        out.b += a.b + b.b
    return ModelGrads(encoder=enc, head=head_grads)


def save_checkpoint(model: PairModel, path) -> None:
    """Write the model as CHECKPOINT_MAGIC + JSON header + raw float64 data."""
    arrays = model.named_arrays()
    order = list(arrays.keys())
    header = {
        "config": model.config.to_dict(),
        "order": order,
        "shapes": {k: list(arrays[k].shape) for k in order},
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k in order:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())


def load_checkpoint(path) -> PairModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC) + 1)
        if magic != CHECKPOINT_MAGIC + b"\n":
            raise DataError(f"{path}: not a recognized checkpoint (bad magic)")
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise DataError(f"{path}: truncated checkpoint header")
        (hlen,) = struct.unpack("<Q", raw_len)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise DataError(f"{path}: truncated checkpoint header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: unreadable checkpoint header: {exc}") from exc
        config = ModelConfig.from_dict(header["config"])
        arrays: dict[str, np.ndarray] = {}
        for name in header["order"]:
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 8)
            if len(data) != count * 8:
                raise DataError(f"{path}: truncated array data for {name}")
            arrays[name] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after checkpoint data")
    expected = {
        "fwd.W_x", "fwd.W_h", "fwd.b", "bwd.W_x", "bwd.W_h", "bwd.b",
        "head.W1", "head.b1", "head.W2", "head.b2",
    }
    if set(arrays) != expected:
        raise DataError(f"{path}: checkpoint arrays {sorted(arrays)} do not match expected set")
    from .encoder import LstmDirectionParams

    model = PairModel(
        config=config,
        encoder=EncoderParams(
            fwd=LstmDirectionParams(arrays["fwd.W_x"], arrays["fwd.W_h"], arrays["fwd.b"]),
            bwd=LstmDirectionParams(arrays["bwd.W_x"], arrays["bwd.W_h"], arrays["bwd.b"]),
        ),
        head=HeadParams(arrays["head.W1"], arrays["head.b1"], arrays["head.W2"], arrays["head.b2"]),
    )
    _check_model_shapes(model, path)
    return model


def _check_model_shapes(model: PairModel, path) -> None:
    cfg = model.config
    H, D = cfg.hidden_size, cfg.input_width
    if model.encoder.fwd.W_x.shape != (4 * H, D):
        raise DataError(f"{path}: encoder shapes do not match the stored config")
    expected_in = compose_width(cfg.task, H)
    if model.head.W1.shape != (cfg.head_size, expected_in):
        raise DataError(f"{path}: head shapes do not match the stored config")
    if model.head.W2.shape != (cfg.task.num_classes, cfg.head_size):
        raise DataError(f"{path}: head output width does not match the task")
