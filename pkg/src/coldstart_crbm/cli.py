"""Command-line entry point: ``coldstart-crbm <command> [options]``.

Output layout under ``--out DIR``::

    DIR/split/train.tsv, test.tsv, vocab.json, split.json, features.csv
    DIR/model.json
    DIR/train_report.jsonl
    DIR/eval_<task>.json, DIR/roc_<task>.csv
    DIR/clusters.json, DIR/clusters.txt
    DIR/run_<command>.json          one manifest per invocation

Exit codes: 0 success, 2 input/config error, 3 numeric failure,
4 verification failure.
"""

import argparse
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import model as model_mod
from .data import (ColdStartSplit, DataError, Task, file_sha256, parse_features,
                   parse_movielens_genres, parse_ratings, split_cold_start)
from .evaluation import evaluate
from .interpret import feature_embeddings, kmeans, write_cluster_report
from .model import cold_start_scores, load_model, save_model
from .training import NumericalError, TrainConfig, train
from .verify import run_checks

logger = logging.getLogger("coldstart_crbm")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
TASKS = {t.value: t for t in Task}


class InputError(Exception):
    pass


def data_root():
    return Path(os.environ.get("COLDSTART_CRBM_DATA", "data"))


def _write_manifest(out, command, config, inputs, seed, outputs, started):
    doc = {
        "command": command,
        "config": config,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    path = Path(out) / f"run_{command}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require(path, what):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _load_split(split_dir):
    split_dir = Path(split_dir)
    _require(split_dir / "split.json", "split manifest")
    split = ColdStartSplit.load(split_dir)
    features = parse_features(_require(split_dir / "features.csv", "feature file"),
                              split.train.items)
    return split, features


def cmd_prepare(args):
    started = time.perf_counter()
    root = data_root() / "ml-100k"
    ratings_path = _require(args.ratings or root / "u.data", "ratings file")
    data = parse_ratings(ratings_path)
    if args.features:
        feat_path = _require(args.features, "features file")
        features = parse_features(feat_path, data.items)
    else:
        feat_path = _require(args.genres or root / "u.item", "u.item genre file")
        features = parse_movielens_genres(feat_path, data.items)
    split = split_cold_start(data, args.held_out, args.seed)
    out = Path(args.out) / "split"
    split.save(out)
    features.write(out / "features.csv")
    outputs = [out / n for n in ("train.tsv", "test.tsv", "vocab.json", "split.json", "features.csv")]
    _write_manifest(args.out, "prepare", {"held_out": args.held_out}, [ratings_path, feat_path],
                    args.seed, outputs, started)
    print(f"{data.n_users} users, {data.n_items} items, {len(data)} ratings, "
          f"{features.n_features} features; held out {len(split.held_out_items)} items "
          f"({len(split.test)} test ratings) -> {out}")
    return EXIT_OK


def _config_from_args(args):
    overrides = {
        "hidden_units": args.hidden, "learning_rate": args.lr, "weight_decay": args.decay,
        "epochs": args.epochs, "negative_sample_ratio": args.neg_ratio, "seed": args.seed,
        "cd_steps": args.cd_steps, "batch_items": args.batch_items, "init_scale": args.init_scale,
        "momentum": args.momentum, "lr_decay": args.lr_decay,
    }
    if args.config:
        return TrainConfig.from_file(_require(args.config, "config file"), **overrides)
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_train(args):
    started = time.perf_counter()
    out = Path(args.out)
    split_dir = Path(args.split or out / "split")
    split, features = _load_split(split_dir)
    config = _config_from_args(args)
    task = TASKS[args.task]
    cfg = dict(config.to_dict(), task=task.value)
    model_path = out / "model.json"
    report_path = out / "train_report.jsonl"

    def progress(rec, _params):
        logger.info("epoch %d recon_error %.5f", rec["epoch"], rec["recon_error"])

    try:
        params, report = train(split, features, task, config, threads=args.threads,
                               on_epoch=progress)
    except NumericalError as exc:
        if exc.last_good is not None:
            save_model(model_path, exc.last_good, split.train.users, features.labels, cfg)
        print(f"error: {exc} (epoch {exc.epoch}; last good parameters kept in {model_path})",
              file=sys.stderr)
        return EXIT_NUMERIC
    save_model(model_path, params, split.train.users, features.labels, cfg)
    report.write_jsonl(report_path)
    _write_manifest(out, "train", cfg, [split_dir / "train.tsv", split_dir / "features.csv"],
                    config.seed, [model_path, report_path], started)
    last = report.epochs[-1]["recon_error"] if report.epochs else float("nan")
    print(f"trained {config.epochs} epochs (final recon_error {last:.5f}) -> {model_path}")
    return EXIT_OK


def cmd_evaluate(args):
    started = time.perf_counter()
    out = Path(args.out)
    model_path = _require(args.model or out / "model.json", "model file")
    split_dir = Path(args.split or out / "split")
    split, features = _load_split(split_dir)
    mf = load_model(model_path)
    if mf.feature_labels != features.labels:
        raise InputError("model feature vocabulary does not match the split's feature file")
    task = TASKS[args.task]
    threshold = mf.config.get("like_threshold", 3)
    report_path = out / f"eval_{task.value}.json"
    roc_path = out / f"roc_{task.value}.csv"
    report = evaluate(mf.params, split, features, task, threshold)
    report.write(report_path, roc_path)
    _write_manifest(out, "evaluate", {"task": task.value, "like_threshold": threshold},
                    [model_path, split_dir / "test.tsv"], split.seed, [report_path, roc_path],
                    started)
    print(f"{task.value}: AUC {report.auc:.4f} over {report.n_pairs} pairs "
          f"({report.n_pos} positive, {report.n_neg} negative) -> {report_path}")
    return EXIT_OK


def _read_labels(path):
    text = Path(path).read_text(encoding="utf-8")
    labels = []
    for line in text.splitlines():
        labels.extend(x.strip() for x in line.split(",") if x.strip())
    return labels


def cmd_predict(args):
    started = time.perf_counter()
    model_path = _require(args.model or Path(args.out) / "model.json", "model file")
    feat_path = _require(args.feature_file, "feature vector file")
    mf = load_model(model_path)
    index = {lab: k for k, lab in enumerate(mf.feature_labels)}
    labels = _read_labels(feat_path)
    unknown = sorted({lab for lab in labels if lab not in index})
    for lab in unknown:
        logger.warning("unknown feature label %r ignored", lab)
    if labels and len(unknown) == len(set(labels)):
        raise InputError("none of the feature labels are known to the model")
    f = np.zeros(len(mf.feature_labels))
    for lab in labels:
        if lab in index:
            f[index[lab]] = 1.0
    scores = cold_start_scores(mf.params, f)
    order = np.lexsort((np.arange(len(scores)), -scores))[:max(args.top_k, 0)]
    ranked = [{"user": mf.users[i], "score": float(scores[i])} for i in order]
    if args.format == "csv":
        text = "user,score\n" + "".join(f"{r['user']},{r['score']!r}\n" for r in ranked)
    else:
        text = json.dumps(ranked, indent=2) + "\n"
    outputs = []
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        outputs.append(args.output)
    else:
        sys.stdout.write(text)
    _write_manifest(args.out, "predict", {"top_k": args.top_k, "format": args.format},
                    [model_path, feat_path], None, outputs, started)
    return EXIT_OK


def cmd_cluster(args):
    started = time.perf_counter()
    out = Path(args.out)
    model_path = _require(args.model or out / "model.json", "model file")
    mf = load_model(model_path)
    emb = feature_embeddings(mf.params, mf.feature_labels)
    c = kmeans(emb, k=args.k, seed=args.seed, restarts=args.restarts, metric=args.metric)
    json_path, text_path = out / "clusters.json", out / "clusters.txt"
    _, text = write_cluster_report(c, args.top_n, json_path, text_path)
    _write_manifest(out, "cluster", {"k": args.k, "top_n": args.top_n, "restarts": args.restarts,
                                     "metric": args.metric}, [model_path], args.seed,
                    [json_path, text_path], started)
    sys.stdout.write(text)
    return EXIT_OK


@contextmanager
def _corrupted_sigmoid():
    original = model_mod.sigmoid
    model_mod.sigmoid = lambda x: original(np.asarray(x) + 0.1)
    try:
        yield
    finally:
        model_mod.sigmoid = original


def cmd_verify(args):
    started = time.perf_counter()
    if args.trials == 0:
        logger.warning("trials=0: no instances checked")
    if args.max_visible + args.max_hidden > 20:
        raise InputError("max-visible + max-hidden must not exceed 20")
    if args.corrupt_sigmoid:
        with _corrupted_sigmoid():
            results = run_checks(args.trials, args.seed, args.max_visible, args.max_hidden,
                                 args.max_features)
    else:
        results = run_checks(args.trials, args.seed, args.max_visible, args.max_hidden,
                             args.max_features)
    for r in results:
        print(r.line())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_manifest(args.out, "verify", {"trials": args.trials}, [], args.seed, [], started)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="coldstart-crbm",
                                description="Cold-start recommendation with conditional RBMs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="run"):
        sp.add_argument("--out", default=out_default, help="output directory (default: %(default)s)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("prepare", help="parse data and write a cold-start split")
    common(sp)
    sp.add_argument("--ratings", help="u.data or CSV ratings (default: $COLDSTART_CRBM_DATA/ml-100k/u.data)")
    sp.add_argument("--features", help="CSV of item_id,feature_label pairs")
    sp.add_argument("--genres", help="MovieLens u.item file; used when --features is absent")
    sp.add_argument("--held-out", type=int, default=333)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="fit a CRBM on a prepared split")
    common(sp)
    sp.add_argument("--split", help="split directory (default: OUT/split)")
    sp.add_argument("--task", choices=sorted(TASKS), default="rating")
    sp.add_argument("--config", help="JSON or TOML training config; flags override it")
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--decay", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--neg-ratio", type=float)
    sp.add_argument("--cd-steps", type=int)
    sp.add_argument("--batch-items", type=int)
    sp.add_argument("--init-scale", type=float)
    sp.add_argument("--momentum", type=float, help="classical momentum (default 0: off)")
    sp.add_argument("--lr-decay", type=float,
                    help="step size lr / (1 + decay * (epoch - 1)) (default 0: constant)")
    sp.set_defaults(func=cmd_train, seed=None)

    sp = sub.add_parser("evaluate", help="ROC/AUC on the held-out items")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--split")
    sp.add_argument("--task", choices=sorted(TASKS), default="rating")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="rank users for a new item from its features")
    common(sp)
    sp.add_argument("feature_file", help="feature labels, one per line or comma-separated")
    sp.add_argument("--model")
    sp.add_argument("--top-k", type=int, default=10)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--output", help="write the ranking here instead of stdout")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("cluster", help="k-means over per-feature weight vectors")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--top-n", type=int, default=4)
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("verify", help="check model math against brute-force enumeration")
    common(sp, out_default=None)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--max-visible", type=int, default=5)
    sp.add_argument("--max-hidden", type=int, default=4)
    sp.add_argument("--max-features", type=int, default=3)
    sp.add_argument("--corrupt-sigmoid", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out", None):
        Path(args.out).mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except (InputError, DataError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
