"""Command-line entry point.

Subcommands: ppdb-stats, featurize, train, grid, eval, analyze,
gradcheck. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 numerical failure.

Heavy imports happen inside the handlers so --threads can pin the BLAS
thread count through environment variables before numpy first loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import DataError, NumericalError

GRADCHECK_TOLERANCE = 1e-4

CONFIG_KEYS = {
    "task", "format", "train", "dev", "test", "glove", "ppdb", "score_range",
    "feature_mode", "hidden_size", "head_size", "embed_dim", "score_fn",
    "embed_dropout", "head_dropout", "weight_dropout",
    "lr", "decay_factor", "min_lr", "max_epochs", "batch_size", "clip_norm",
    "seed", "decay_on", "rollback", "dev_metric", "checkpoint",
    "embed_grid", "head_grid", "weight_grid",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable stdout")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    common.add_argument(
        "--deterministic", action="store_true", help="single-threaded, reproducible numerics"
    )

    parser = _Parser(prog="regmapr", description="Text-pair matching toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "ppdb-stats", parents=[common], help="index a paraphrase file and report statistics"
    )
    p.add_argument("ppdb")
    p.add_argument("--bin-width", type=int, default=100)
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--tsv", default=None, help="write (bin_start, count) rows here")

    p = sub.add_parser("featurize", parents=[common], help="emit per-token match bits for a dataset")
    p.add_argument("data")
    p.add_argument("--mode", default="mapr", choices=["base", "ma", "pr", "mapr"])
    p.add_argument("--glove", default=None)
    p.add_argument("--ppdb", default=None)
    _data_flags(p)
    p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("train", parents=[common], help="train a model from a JSON config")
    p.add_argument("config")
    _override_flags(p)

    p = sub.add_parser("grid", parents=[common], help="sweep dropout rates from a JSON config")
    p.add_argument("config")
    _override_flags(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--glove", required=True)
    p.add_argument("--ppdb", default=None)
    p.add_argument("--batch-size", type=int, default=32)
    _data_flags(p)

    p = sub.add_parser("analyze", parents=[common], help="class-conditional match-bit statistics")
    p.add_argument("data")
    p.add_argument("--ppdb", required=True)
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--tsv", default=None, help="write the (feature, R_P, R_N, R) table here")
    _data_flags(p)

    p = sub.add_parser(
        "gradcheck", parents=[common], help="finite-difference check on a tiny built-in model"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=4, help="probed coordinates per group")
    return parser


def _data_flags(p):
    p.add_argument("--format", default="pairs-jsonl", choices=["pairs-jsonl", "tsv"])
    p.add_argument(
        "--task", default=None, choices=["entailment3", "paraphrase2", "relatedness"]
    )
    p.add_argument("--score-range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--skip-bad", action="store_true", help="skip malformed lines instead of failing")


def _override_flags(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--hidden-size", type=int, default=None)
    p.add_argument("--head-size", type=int, default=None)
    p.add_argument("--feature-mode", default=None, choices=["base", "ma", "pr", "mapr"])
    p.add_argument("--embed-dropout", type=float, default=None)
    p.add_argument("--head-dropout", type=float, default=None)
    p.add_argument("--weight-dropout", type=float, default=None)
    p.add_argument("--score-fn", default=None, choices=["clamp", "neg-abs"])
    p.add_argument("--decay-on", default=None, choices=["best", "prev"])
    p.add_argument("--dev-metric", default=None)
    p.add_argument("--no-rollback", action="store_true")
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--checkpoint", default=None)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    _configure_threads(args)
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def _configure_threads(args) -> None:
    threads = 1 if args.deterministic else args.threads
    if threads is not None:
        if threads < 1:
            raise SystemExit("--threads must be positive")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def _dispatch(args) -> int:
    handler = {
        "ppdb-stats": _cmd_ppdb_stats,
        "featurize": _cmd_featurize,
        "train": _cmd_train,
        "grid": _cmd_grid,
        "eval": _cmd_eval,
        "analyze": _cmd_analyze,
        "gradcheck": _cmd_gradcheck,
    }[args.command]
    return handler(args)


def _emit(args, report: dict, human: str) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(human)


def _cmd_ppdb_stats(args) -> int:
    from .ppdb import build_index, median_paraphrase_count, paraphrase_histogram

    index = build_index(args.ppdb, symmetrize=args.symmetrize)
    hist = paraphrase_histogram(index, args.bin_width)
    median = median_paraphrase_count(index)
    report = {
        "pair_count": index.pair_count,
        "word_count": index.word_count,
        "skipped_multiword": index.skipped_multiword,
        "median_paraphrases": median,
        "bin_width": args.bin_width,
        "histogram": {str(start): count for start, count in hist},
    }
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8") as fh:
            fh.write("bin_start\tcount\n")
            for start, count in hist:
                fh.write(f"{start}\t{count}\n")
    lines = [
        f"pairs: {index.pair_count}",
        f"words: {index.word_count}",
        f"skipped multiword entries: {index.skipped_multiword}",
        f"median paraphrases per word: {median}",
        f"histogram (bin width {args.bin_width}):",
    ]
    for start, count in hist:
        lines.append(f"  {start}-{start + args.bin_width - 1}: {count}")
    _emit(args, report, "\n".join(lines))
    return 0


def _load_cli_dataset(args, task_default=None):
    from .corpus import TaskKind, load_dataset

    task_name = args.task or task_default
    if task_name is None:
        raise UsageError("--task is required for this input")
    task = TaskKind(task_name) if isinstance(task_name, str) else task_name
    score_range = tuple(args.score_range) if args.score_range else None
    return load_dataset(
        args.data,
        args.format,
        task,
        score_range=score_range,
        skip_bad=getattr(args, "skip_bad", False),
    )


def _cmd_featurize(args) -> int:
    from .features import FeatureMode, load_glove, ma_feature, pr_feature
    from .ppdb import build_index

    mode = FeatureMode(args.mode)
    if mode.uses_pr and not args.ppdb:
        raise UsageError(f"mode {mode.value} needs --ppdb")
    dataset = _load_cli_dataset(args, task_default="paraphrase2")
    index = build_index(args.ppdb) if args.ppdb else None
    table = None
    if args.glove:
        vocab = set()
        for pair in dataset.pairs:
            vocab.update(pair.s1.tokens)
            vocab.update(pair.s2.tokens)
        table = load_glove(args.glove, restrict_vocab=vocab)

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for pair in dataset.pairs:
            record = {"s1": list(pair.s1.tokens), "s2": list(pair.s2.tokens), "label": pair.gold}
            set1, set2 = pair.s1.token_set(), pair.s2.token_set()
            if mode.uses_ma:
                record["ma1"] = [ma_feature(t, set2) for t in pair.s1.tokens]
                record["ma2"] = [ma_feature(t, set1) for t in pair.s2.tokens]
            if mode.uses_pr:
                record["pr1"] = [pr_feature(t, set2, index) for t in pair.s1.tokens]
                record["pr2"] = [pr_feature(t, set1, index) for t in pair.s2.tokens]
            if table is not None:
                record["oov1"] = [int(t not in table) for t in pair.s1.tokens]
                record["oov2"] = [int(t not in table) for t in pair.s2.tokens]
            out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _load_config(path, args) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    overrides = {
        "seed": args.seed, "lr": args.lr, "max_epochs": args.max_epochs,
        "batch_size": args.batch_size, "hidden_size": args.hidden_size,
        "head_size": args.head_size, "feature_mode": args.feature_mode,
        "embed_dropout": args.embed_dropout, "head_dropout": args.head_dropout,
        "weight_dropout": args.weight_dropout, "score_fn": args.score_fn,
        "decay_on": args.decay_on, "dev_metric": args.dev_metric,
        "checkpoint": args.checkpoint,
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if args.no_rollback:
        cfg["rollback"] = False
    if args.no_clip:
        cfg["clip_norm"] = None
    for key in ("task", "train", "dev", "glove"):
        if key not in cfg:
            raise UsageError(f"config is missing required key {key!r}")
    return cfg


def _setup_run(cfg):
    """Load data, embeddings, and the paraphrase index for train/grid."""
    from .corpus import TaskKind, load_dataset
    from .encoder import RegularizationConfig
    from .features import FeatureMode, load_glove
    from .model import ModelConfig
    from .ppdb import build_index
    from .training import TrainConfig

    task = TaskKind(cfg["task"])
    fmt = cfg.get("format", "pairs-jsonl")
    score_range = tuple(cfg["score_range"]) if cfg.get("score_range") else None
    datasets = {}
    for split in ("train", "dev", "test"):
        if cfg.get(split):
            datasets[split] = load_dataset(
                cfg[split], fmt, task, split=split, score_range=score_range
            )
    feature_mode = FeatureMode(cfg.get("feature_mode", "mapr"))
    index = None
    if feature_mode.uses_pr:
        if not cfg.get("ppdb"):
            raise UsageError(f"feature mode {feature_mode.value} needs a 'ppdb' path")
        index = build_index(cfg["ppdb"])
    vocab = set()
    for ds in datasets.values():
        for pair in ds.pairs:
            vocab.update(pair.s1.tokens)
            vocab.update(pair.s2.tokens)
    embed_dim = int(cfg.get("embed_dim", 300))
    table = load_glove(cfg["glove"], restrict_vocab=vocab, dim=embed_dim)
    mcfg = ModelConfig(
        task=task,
        feature_mode=feature_mode,
        hidden_size=int(cfg.get("hidden_size", 600)),
        head_size=int(cfg.get("head_size", 600)),
        embed_dim=embed_dim,
        score_fn=cfg.get("score_fn", "clamp"),
        reg=RegularizationConfig(
            embed_dropout=float(cfg.get("embed_dropout", 0.0)),
            head_dropout=float(cfg.get("head_dropout", 0.0)),
            weight_dropout=float(cfg.get("weight_dropout", 0.0)),
        ),
    )
    clip = cfg.get("clip_norm", 5.0)
    tcfg = TrainConfig(
        lr=float(cfg.get("lr", 1e-3)),
        decay_factor=float(cfg.get("decay_factor", 0.5)),
        min_lr=float(cfg.get("min_lr", 1e-5)),
        max_epochs=int(cfg.get("max_epochs", 50)),
        batch_size=int(cfg.get("batch_size", 32)),
        clip_norm=None if clip is None else float(clip),
        seed=int(cfg.get("seed", 0)),
        decay_on=cfg.get("decay_on", "best"),
        rollback=bool(cfg.get("rollback", True)),
        dev_metric=cfg.get("dev_metric", ""),
    )
    return datasets, table, index, mcfg, tcfg, score_range


def _cmd_train(args) -> int:
    from .model import init_model, save_checkpoint
    from .training import evaluate, named_stream, train

    cfg = _load_config(args.config, args)
    datasets, table, index, mcfg, tcfg, score_range = _setup_run(cfg)
    model = init_model(mcfg, named_stream(tcfg.seed, "init"))
    report = train(
        model,
        datasets["train"].pairs,
        datasets["dev"].pairs,
        table,
        index,
        tcfg,
        dev_score_range=score_range,
        on_epoch=lambda r: print(
            f"epoch {r.epoch}: loss {r.train_loss:.6f} dev {r.dev} lr {r.lr:g}",
            file=sys.stderr,
        ),
    )
    out = report.to_dict()
    if "test" in datasets:
        out["test"] = evaluate(
            model, datasets["test"].pairs, table, index, tcfg.batch_size, score_range
        )
    if cfg.get("checkpoint"):
        save_checkpoint(model, cfg["checkpoint"])
        out["checkpoint"] = cfg["checkpoint"]
    lines = [
        f"best {report.metric_name}: {report.best_metric} (epoch {report.best_epoch})",
        f"epochs run: {report.epochs_run} ({report.stop_reason})",
    ]
    if "test" in out:
        lines.append("test: " + ", ".join(f"{k}={v}" for k, v in out["test"].items()))
    if "checkpoint" in out:
        lines.append(f"checkpoint: {out['checkpoint']}")
    _emit(args, out, "\n".join(lines))
    return 0


def _cmd_grid(args) -> int:
    from .training import grid_search
    from .training import DEFAULT_EMBED_GRID, DEFAULT_HEAD_GRID, DEFAULT_WEIGHT_GRID

    cfg = _load_config(args.config, args)
    datasets, table, index, mcfg, tcfg, score_range = _setup_run(cfg)
    result = grid_search(
        mcfg,
        datasets["train"].pairs,
        datasets["dev"].pairs,
        table,
        index,
        tcfg,
        embed_grid=tuple(cfg.get("embed_grid", DEFAULT_EMBED_GRID)),
        head_grid=tuple(cfg.get("head_grid", DEFAULT_HEAD_GRID)),
        weight_grid=tuple(cfg.get("weight_grid", DEFAULT_WEIGHT_GRID)),
        dev_score_range=score_range,
    )
    lines = [f"{'embed':>6} {'head':>6} {'weight':>6}  best {result.metric_name}"]
    for cell in result.cells:
        marker = " *" if cell is result.best else ""
        lines.append(
            f"{cell.embed_dropout:>6} {cell.head_dropout:>6} {cell.weight_dropout:>6}  "
            f"{cell.best_metric:.6f} (epoch {cell.best_epoch}){marker}"
        )
    _emit(args, result.to_dict(), "\n".join(lines))
    return 0


def _cmd_eval(args) -> int:
    from .features import load_glove
    from .model import load_checkpoint
    from .ppdb import build_index
    from .training import evaluate

    model = load_checkpoint(args.checkpoint)
    if args.task and args.task != model.config.task.value:
        raise UsageError(
            f"checkpoint task {model.config.task.value} does not match --task {args.task}"
        )
    args.task = model.config.task.value
    dataset = _load_cli_dataset(args)
    index = None
    if model.config.feature_mode.uses_pr:
        if not args.ppdb:
            raise UsageError(f"feature mode {model.config.feature_mode.value} needs --ppdb")
        index = build_index(args.ppdb)
    vocab = set()
    for pair in dataset.pairs:
        vocab.update(pair.s1.tokens)
        vocab.update(pair.s2.tokens)
    table = load_glove(args.glove, restrict_vocab=vocab, dim=model.config.embed_dim)
    score_range = tuple(args.score_range) if args.score_range else None
    metrics = evaluate(
        model, dataset.pairs, table, index, args.batch_size, score_range
    )
    _emit(args, metrics, "\n".join(f"{k}: {v}" for k, v in metrics.items()))
    return 0


def _cmd_analyze(args) -> int:
    from .analysis import analyze, reports_to_tsv
    from .ppdb import build_index

    dataset = _load_cli_dataset(args, task_default="paraphrase2")
    index = build_index(args.ppdb, symmetrize=args.symmetrize)
    reports = analyze(dataset, index)
    tsv = reports_to_tsv(reports)
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8") as fh:
            fh.write(tsv)
    out = {"reports": [r.to_dict() for r in reports]}
    _emit(args, out, tsv.rstrip("\n"))
    return 0


def _cmd_gradcheck(args) -> int:
    from .corpus import TaskKind
    from .encoder import RegularizationConfig
    from .features import FeatureMode
    from .model import ModelConfig, PairBatch, init_model
    from .training import gradient_check, named_stream

    import numpy as np

    worst_overall = 0.0
    report = {}
    for task in TaskKind:
        for reg_on in (False, True):
            reg = (
                RegularizationConfig(embed_dropout=0.2, head_dropout=0.2, weight_dropout=0.1)
                if reg_on
                else RegularizationConfig()
            )
            mcfg = ModelConfig(
                task=task,
                feature_mode=FeatureMode.MAPR,
                hidden_size=8,
                head_size=8,
                embed_dim=300,
                reg=reg,
            )
            model = init_model(mcfg, named_stream(args.seed, "init"))
            if task is TaskKind.RELATEDNESS:
                model.head.b2[:] = -1.0  # keep raw scores inside the active scoring branch
            batch = _synthetic_batch(task, mcfg.input_width, args.seed, np)
            errors = gradient_check(model, batch, seed=args.seed, samples_per_group=args.samples)
            key = f"{task.value}/{'reg' if reg_on else 'plain'}"
            report[key] = errors
            worst_overall = max(worst_overall, max(errors.values()))
    report["max_relative_error"] = worst_overall
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for key, errors in sorted(report.items()):
            if key == "max_relative_error":
                continue
            worst = max(errors.values())
            print(f"{key}: max relative error {worst:.3e}")
        print(f"overall max relative error: {worst_overall:.3e}")
    if worst_overall >= GRADCHECK_TOLERANCE:
        print(
            f"gradient check FAILED: {worst_overall:.3e} >= {GRADCHECK_TOLERANCE}",
            file=sys.stderr,
        )
        return 3
    return 0


def _synthetic_batch(task, width, seed, np):
    from .model import PairBatch
    from .training import named_stream

    rng = named_stream(seed, "gradcheck-data")
    B, T = 4, 6
    x1 = rng.normal(0.0, 0.5, size=(B, T, width))
    x2 = rng.normal(0.0, 0.5, size=(B, T, width))
    len1 = rng.integers(2, T + 1, size=B)
    len2 = rng.integers(2, T + 1, size=B)
    for b in range(B):
        x1[b, len1[b] :] = 0.0
        x2[b, len2[b] :] = 0.0
    from .corpus import TaskKind

    if task is TaskKind.RELATEDNESS:
        golds = rng.random(B)
    else:
        golds = rng.integers(0, task.num_classes, size=B)
    return PairBatch(x1=x1, len1=len1, x2=x2, len2=len2, golds=golds)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
