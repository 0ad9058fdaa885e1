"""Optimization: losses, Adam, the decay-on-plateau schedule, grid search.

All gradients flow through the hand-written backward passes; a
finite-difference harness cross-checks them on demand. Randomness is
organized as named substreams of a single seed so runs replay exactly.
"""

from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import SentencePair, TaskKind
from .errors import NumericalError
from .features import EmbeddingTable, FeatureMode, augment_pair
from .matcher import head_forward, compose, relatedness_score, relatedness_score_backward
from .metrics import accuracy, f1_binary, mse_metric, pearson, spearman
from .model import (
    ModelConfig,
    ModelGrads,
    ModelTape,
    PairBatch,
    PairModel,
    init_model,
    make_batch,
    model_backward,
    model_forward,
)
from .encoder import RegSample, encode_batch

DEFAULT_DEV_METRIC = {
    TaskKind.ENTAILMENT3: "accuracy",
    TaskKind.PARAPHRASE2: "accuracy",
    TaskKind.RELATEDNESS: "pearson",
}

# metrics where larger is better map to +1, error-style metrics to -1
METRIC_SIGN = {"accuracy": 1.0, "f1": 1.0, "pearson": 1.0, "spearman": 1.0, "mse": -1.0}


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator derived from (seed, name)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), tag]))


def fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform permutation of range(n) by backwards swaps."""
    idx = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(z: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    Accepts a single logit vector with an integer label, or a (B, K)
    batch with B labels; the batch form averages, so the gradient
    carries the 1/B factor.
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
        labels = [labels]
    labels = np.asarray(labels, dtype=np.int64)
    B, K = z.shape
    if labels.shape != (B,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {B}")
    if np.any(labels < 0) or np.any(labels >= K):
        raise ValueError(f"labels must lie in [0, {K})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(B), labels]))
    dz = softmax(z)
    dz[np.arange(B), labels] -= 1.0
    dz /= B
    return loss, dz[0] if single else dz


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} vs target {target.shape}")
    d = pred - target
    return float(np.mean(d * d)), 2.0 * d / d.size


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, named: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in named.items()},
            v={k: np.zeros_like(a) for k, a in named.items()},
        )


def adam_step(
    named: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, applied to the arrays in place."""
    if set(named) != set(grads):
        raise ValueError("parameter and gradient keys differ")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for k, p in named.items():
        g = grads[k]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {k}")
        m = state.m[k]
        v = state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients jointly so their combined norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class ScheduleDecision:
    improved: bool
    decayed: bool
    stop: bool
    lr: float


@dataclass
class LrSchedule:
    """Halve the rate whenever the dev metric falls below its reference.

    mode "best" compares each new value against the best seen so far,
    mode "prev" against the immediately preceding epoch. Stops once the
    rate sinks below min_lr.
    """

    lr: float
    factor: float = 0.5
    min_lr: float = 1e-5
    mode: str = "best"
    higher_better: bool = True
    best: float | None = None
    prev: float | None = None

    def __post_init__(self):
        if self.mode not in ("best", "prev"):
            raise ValueError(f"schedule mode must be 'best' or 'prev', got {self.mode!r}")

    def observe(self, value: float) -> ScheduleDecision:
        sign = 1.0 if self.higher_better else -1.0
        improved = self.best is None or sign * (value - self.best) > 0.0
        reference = self.best if self.mode == "best" else self.prev
        decayed = False
        if reference is not None and sign * (value - reference) < 0.0:
            self.lr *= self.factor
            decayed = True
        if improved:
            self.best = value
        self.prev = value
        return ScheduleDecision(
            improved=improved, decayed=decayed, stop=self.lr < self.min_lr, lr=self.lr
        )


@dataclass
class TrainConfig:
    lr: float = 1e-3
    decay_factor: float = 0.5
    min_lr: float = 1e-5
    max_epochs: int = 50
    batch_size: int = 32
    clip_norm: float | None = 5.0
    seed: int = 0
    decay_on: str = "best"
    rollback: bool = True
    dev_metric: str = ""  # empty selects the task default
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def metric_for(self, task: TaskKind) -> str:
        name = self.dev_metric or DEFAULT_DEV_METRIC[task]
        if name not in METRIC_SIGN:
            raise ValueError(f"unknown dev metric {name!r}")
        return name


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    lr: float
    dev: dict
    improved: bool
    decayed: bool


@dataclass
class TrainReport:
    metric_name: str
    history: list[EpochRecord] = field(default_factory=list)
    best_metric: float = 0.0
    best_epoch: int = 0
    epochs_run: int = 0
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "best_metric": self.best_metric,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "history": [
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "lr": r.lr,
                    "dev": r.dev,
                    "improved": r.improved,
                    "decayed": r.decayed,
                }
                for r in self.history
            ],
        }


def batch_loss_and_grads(
    model: PairModel,
    batch: PairBatch,
    mode: str = "train",
    rng: np.random.Generator | None = None,
) -> tuple[float, ModelGrads, ModelTape]:
    """Forward, loss, and full backward for one batch."""
    z, tape = model_forward(model, batch, mode, rng)
    loss, dz = _loss_and_dz(model, z, batch.golds)
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss {loss}")
    grads = model_backward(model, tape, dz)
    return loss, grads, tape


def _loss_and_dz(model: PairModel, z: np.ndarray, golds: np.ndarray):
    if model.config.task is TaskKind.RELATEDNESS:
        raw = z[:, 0]
        score = relatedness_score(raw, model.config.score_fn)
        loss, dscore = mse_loss(score, golds)
        dz = (dscore * relatedness_score_backward(raw, model.config.score_fn))[:, None]
        return loss, dz
    return cross_entropy(z, golds)


def predictions_from_output(model: PairModel, z: np.ndarray) -> np.ndarray:
    if model.config.task is TaskKind.RELATEDNESS:
        return relatedness_score(z[:, 0], model.config.score_fn)
    return np.argmax(z, axis=1)


def _batches(n: int, batch_size: int, order=None):
    order = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def evaluate(
    model: PairModel,
    pairs: list[SentencePair],
    table: EmbeddingTable,
    index=None,
    batch_size: int = 32,
    score_range: tuple[float, float] | None = None,
) -> dict:
    """Task-appropriate metrics on a dataset, in eval mode.

    For relatedness, squared error is reported on score_range units when
    a range is given (correlations are unaffected by that rescaling).
    """
    if not pairs:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = []
    golds = []
    for idx in _batches(len(pairs), batch_size):
        batch = make_batch([pairs[i] for i in idx], table, index, model.config.feature_mode)
        z, _ = model_forward(model, batch, mode="eval")
        preds.append(predictions_from_output(model, z))
        golds.append(batch.golds)
    pred = np.concatenate(preds)
    gold = np.concatenate(golds)
    task = model.config.task
    if task is TaskKind.RELATEDNESS:
        return {
            "pearson": pearson(pred, gold),
            "spearman": spearman(pred, gold),
            "mse": mse_metric(pred, gold, score_range or (0.0, 1.0)),
        }
    out = {"accuracy": accuracy(pred, gold)}
    if task is TaskKind.PARAPHRASE2:
        out["f1"] = f1_binary(pred, gold)
    return out


def _precompute_matrices(pairs, table, index, feature_mode):
    sides1, sides2 = [], []
    for pair in pairs:
        a1, a2 = augment_pair(pair, table, index, feature_mode)
        sides1.append(a1.matrix)
        sides2.append(a2.matrix)
    return sides1, sides2


def _assemble_from_cache(pairs, sides1, sides2, idx, task, width) -> PairBatch:
    from .model import _pad_stack, golds_array

    chosen = [int(i) for i in idx]
    x1, len1 = _pad_stack([sides1[i] for i in chosen], width)
    x2, len2 = _pad_stack([sides2[i] for i in chosen], width)
    golds = golds_array([pairs[i] for i in chosen], task)
    return PairBatch(x1=x1, len1=len1, x2=x2, len2=len2, golds=golds)


def train(
    model: PairModel,
    train_pairs: list[SentencePair],
    dev_pairs: list[SentencePair],
    table: EmbeddingTable,
    index=None,
    tcfg: TrainConfig | None = None,
    dev_score_range: tuple[float, float] | None = None,
    on_epoch=None,
) -> TrainReport:
    """Adam with halve-on-plateau, tracking the best dev epoch.

    The model is updated in place. When rollback is on, a decay restores
    the best parameters before continuing, and the best parameters are
    also installed at the end; with rollback off the schedule only
    changes the rate and the final parameters are the last epoch's.
    on_epoch, when given, is called with each EpochRecord as it is made.
    """
    tcfg = tcfg or TrainConfig()
    if not train_pairs:
        raise ValueError("training set is empty")
    if not dev_pairs:
        raise ValueError("dev set is empty: the schedule needs a dev metric")
    metric_name = tcfg.metric_for(model.config.task)
    higher_better = METRIC_SIGN[metric_name] > 0
    schedule = LrSchedule(
        lr=tcfg.lr,
        factor=tcfg.decay_factor,
        min_lr=tcfg.min_lr,
        mode=tcfg.decay_on,
        higher_better=higher_better,
    )
    mask_rng = named_stream(tcfg.seed, "masks")
    named = model.named_arrays()
    adam = AdamState.for_params(named)
    sides1, sides2 = _precompute_matrices(
        train_pairs, table, index, model.config.feature_mode
    )
    width = model.config.input_width
    report = TrainReport(metric_name=metric_name)
    best_params = {k: a.copy() for k, a in named.items()}
    best_value = None

    for epoch in range(1, tcfg.max_epochs + 1):
        order = fisher_yates(len(train_pairs), named_stream(tcfg.seed, f"shuffle-{epoch}"))
        losses = []
        for idx in _batches(len(train_pairs), tcfg.batch_size, order):
            batch = _assemble_from_cache(
                train_pairs, sides1, sides2, idx, model.config.task, width
            )
            loss, grads, _ = batch_loss_and_grads(model, batch, "train", mask_rng)
            gnamed = grads.named_arrays()
            if tcfg.clip_norm is not None:
                clip_by_global_norm(gnamed, tcfg.clip_norm)
            adam_step(named, gnamed, adam, schedule.lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
            losses.append(loss)
        dev = evaluate(
            model, dev_pairs, table, index, tcfg.batch_size, dev_score_range
        )
        value = dev[metric_name]
        decision = schedule.observe(value)
        if decision.improved:
            best_params = {k: a.copy() for k, a in named.items()}
            best_value = value
            report.best_metric = value
            report.best_epoch = epoch
        elif decision.decayed and tcfg.rollback and best_value is not None:
            for k, a in named.items():
                a[...] = best_params[k]
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            lr=decision.lr,
            dev=dev,
            improved=decision.improved,
            decayed=decision.decayed,
        )
        report.history.append(record)
        report.epochs_run = epoch
        if on_epoch is not None:
            on_epoch(record)
        if decision.stop:
            report.stop_reason = "lr below minimum"
            break
    if not report.stop_reason:
        report.stop_reason = "max epochs reached"
    if tcfg.rollback:
        for k, a in named.items():
            a[...] = best_params[k]
    return report


DEFAULT_EMBED_GRID = (0.0, 0.1, 0.2, 0.3, 0.4)
DEFAULT_HEAD_GRID = (0.0, 0.1, 0.2, 0.3, 0.4)
DEFAULT_WEIGHT_GRID = (0.0, 0.1, 0.2)


@dataclass
class GridCellResult:
    embed_dropout: float
    head_dropout: float
    weight_dropout: float
    best_metric: float
    best_epoch: int
    epochs_run: int

    def to_dict(self) -> dict:
        return {
            "embed_dropout": self.embed_dropout,
            "head_dropout": self.head_dropout,
            "weight_dropout": self.weight_dropout,
            "best_metric": self.best_metric,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
        }


@dataclass
class GridSearchResult:
    metric_name: str
    cells: list[GridCellResult]
    best: GridCellResult

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "best": self.best.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
        }


def grid_search(
    base_config: ModelConfig,
    train_pairs,
    dev_pairs,
    table: EmbeddingTable,
    index=None,
    tcfg: TrainConfig | None = None,
    embed_grid=DEFAULT_EMBED_GRID,
    head_grid=DEFAULT_HEAD_GRID,
    weight_grid=DEFAULT_WEIGHT_GRID,
    dev_score_range=None,
) -> GridSearchResult:
    """Train one model per dropout-rate combination, lexicographic order.

    Every cell starts from the identical initialization (the init stream
    depends only on the seed), so cells differ only in regularization.
    Ties on the dev metric keep the earliest cell.
    """
    import dataclasses

    tcfg = tcfg or TrainConfig()
    metric_name = tcfg.metric_for(base_config.task)
    sign = METRIC_SIGN[metric_name]
    cells: list[GridCellResult] = []
    best: GridCellResult | None = None
    for de, df, dw in itertools.product(embed_grid, head_grid, weight_grid):
        cfg = dataclasses.replace(
            base_config,
            reg=type(base_config.reg)(
                embed_dropout=de, head_dropout=df, weight_dropout=dw
            ),
        )
        model = init_model(cfg, named_stream(tcfg.seed, "init"))
        rep = train(model, train_pairs, dev_pairs, table, index, tcfg, dev_score_range)
        cell = GridCellResult(
            embed_dropout=de,
            head_dropout=df,
            weight_dropout=dw,
            best_metric=rep.best_metric,
            best_epoch=rep.best_epoch,
            epochs_run=rep.epochs_run,
        )
        cells.append(cell)
        if best is None or sign * (cell.best_metric - best.best_metric) > 0.0:
            best = cell
    return GridSearchResult(metric_name=metric_name, cells=cells, best=best)


def _fixed_sample_loss(model: PairModel, batch: PairBatch, s1, s2, head_mask) -> float:
    """Loss with every dropout draw pinned, for derivative probing."""
    cfg = model.config
    h1, _ = encode_batch(batch.x1, batch.len1, model.encoder, cfg.reg, "train", sample=s1)
    h2, _ = encode_batch(batch.x2, batch.len2, model.encoder, cfg.reg, "train", sample=s2)
    v, _ = compose(h1, h2, cfg.task)
    z, _ = head_forward(v, model.head, cfg.reg, "train", mask=head_mask)
    loss, _ = _loss_and_dz(model, z, batch.golds)
    return loss


def gradient_check(
    model: PairModel,
    batch: PairBatch,
    seed: int = 0,
    samples_per_group: int = 4,
    step: float = 1e-5,
) -> dict[str, float]:
    """Compare analytic gradients against central differences.

    Dropout draws are made once and held fixed for every probe, so both
    sides differentiate the same deterministic function. Returns the
    maximum relative error per parameter group.
    """
    cfg = model.config
    rng = named_stream(seed, "gradcheck-masks")
    _, tape = model_forward(model, batch, "train", rng)
    s1, s2 = tape.tape1.sample, tape.tape2.sample
    head_mask = tape.hcache.mask
    loss, dz = _loss_and_dz(model, tape.z, batch.golds)
    grads = model_backward(model, tape, dz).named_arrays()

    probe_rng = named_stream(seed, "gradcheck-coords")
    named = model.named_arrays()
    report: dict[str, float] = {}
    for key, param in named.items():
        flat = param.reshape(-1)
        n = flat.shape[0]
        k = min(samples_per_group, n)
        coords = probe_rng.choice(n, size=k, replace=False)
        worst = 0.0
        for c in coords:
            original = flat[c]
            flat[c] = original + step
            up = _fixed_sample_loss(model, batch, s1, s2, head_mask)
            flat[c] = original - step
            down = _fixed_sample_loss(model, batch, s1, s2, head_mask)
            flat[c] = original
            numeric = (up - down) / (2.0 * step)
            analytic = grads[key].reshape(-1)[c]
            denom = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
        report[key] = worst
    return report
