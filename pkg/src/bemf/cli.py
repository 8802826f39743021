"""Command line interface.

Subcommands: train, grid-search, evaluate, split, info. Every run is
driven by a JSON experiment config (see bemf.config); flags only override
bookkeeping like the output directory or worker count, never the science.

Progress goes to stderr, results go to files under the config's
output_dir, and exit codes are 0 (success), 2 (bad arguments, bad config,
bad input data) and 1 (runtime failure such as diverged training).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import backend, evaluate as ev
from .baselines import (KNNConfig, KNNModel, MFBaselineConfig, MFBaselineModel,
                        enforce_reliability, fit_mf_baseline)
from .config import ConfigError, ExperimentConfig
from .data import RatingDataset, SplitDataset, load_ratings, split_train_test
from .model import BeMFModel, Hyperparams, TrainingDivergedError, fit, resolve_workers
from .serialize import load_container
from .synthetic import make_synthetic_dataset

log = logging.getLogger("bemf")

MODEL_FILENAME = "model.bemf"


# -- dataset plumbing ---------------------------------------------------


def _load_dataset(cfg: ExperimentConfig) -> RatingDataset:
    ds = cfg.dataset_section
    if "synthetic" in ds:
        return make_synthetic_dataset(**ds["synthetic"])
    return load_ratings(ds["path"], cfg.score_set(),
                        separator=cfg.separator, header=cfg.header)


def _materialize_split(cfg: ExperimentConfig) -> SplitDataset:
    sp = cfg.split_section
    if "test_ratio" in sp:
        dataset = _load_dataset(cfg)
        return split_train_test(dataset, float(sp["test_ratio"]),
                                int(sp.get("seed", 0)))
    score_set = cfg.score_set()
    train = load_ratings(sp["train_path"], score_set,
                         separator=cfg.separator, header=cfg.header)
    user_index = {uid: u for u, uid in enumerate(train.user_ids)}
    item_index = {iid: i for i, iid in enumerate(train.item_ids)}
    test = load_ratings(sp["test_path"], score_set,
                        separator=cfg.separator, header=cfg.header,
                        user_index=user_index, item_index=item_index)
    train_pairs = set(zip(train.users.tolist(), train.items.tolist()))
    for u, i in zip(test.users.tolist(), test.items.tolist()):
        if (u, i) in train_pairs:
            raise ConfigError(
                f"split: pair (user {train.user_ids[u]}, item "
                f"{train.item_ids[i]}) appears in both train and test")
    return SplitDataset(train=train, test_users=test.users,
                        test_items=test.items, test_scores=test.score_idx,
                        test_ratio=None, seed=None)


def _test_values(split: SplitDataset) -> np.ndarray:
    values = np.asarray(split.train.score_set.values)
    return values[split.test_scores]


# -- model fitting / loading ---------------------------------------------


def _fit_model(cfg: ExperimentConfig, split: SplitDataset, workers,
               overrides: dict | None = None, cost_rows: list | None = None):
    """Fit the configured model; returns an object with .save(path)."""
    mcfg = cfg.model_config(overrides)
    if isinstance(mcfg, Hyperparams):
        total = mcfg.iterations
        report_every = max(1, total // 10) if total else 1

        def on_iteration(it, costs):
            if cost_rows is not None:
                cost_rows.append((it, costs.copy()))
            if (it + 1) % report_every == 0 or it + 1 == total:
                log.info("bemf iteration %d/%d, total cost %.6g",
                         it + 1, total, float(costs.sum()))

        callback = on_iteration if cost_rows is not None else None
        return fit(split.train, mcfg, on_iteration=callback, workers=workers)
    if isinstance(mcfg, MFBaselineConfig):
        log.info("fitting %s (%d iterations)", mcfg.variant, mcfg.iterations)
        return fit_mf_baseline(split.train, mcfg)
    log.info("building knn-%s model", mcfg.variant)
    return KNNModel(split.train, mcfg)


def _load_model(path: str):
    kind, _, _ = load_container(path)
    if kind == "bemf":
        return kind, BeMFModel.load(path)
    if kind in ("pmf", "biasedmf"):
        return kind, MFBaselineModel.load(path)
    if kind.startswith("knn-"):
        return kind, KNNModel.load(path)
    raise ConfigError(f"{path}: unknown model kind {kind!r}")


def _check_model_matches(model, split: SplitDataset, path: str) -> None:
    train = split.train
    if model.score_set != train.score_set:
        raise ConfigError(
            f"{path}: model score set [{', '.join(model.score_set.labels)}] "
            f"does not match the dataset's "
            f"[{', '.join(train.score_set.labels)}]")
    if list(model.user_ids) != list(train.user_ids) or \
            list(model.item_ids) != list(train.item_ids):
        raise ConfigError(
            f"{path}: model universe does not match the configured dataset "
            "(different users or items); retrain with this config")


# -- commands ------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    outdir = args.output_dir or cfg.output_dir
    split = _materialize_split(cfg)
    log.info("train: %d users, %d items, %d train / %d test ratings",
             split.train.num_users, split.train.num_items,
             split.train.num_ratings, split.num_test)
    cost_rows: list | None = [] if cfg.model_type == "bemf" else None
    model = _fit_model(cfg, split, args.workers, cost_rows=cost_rows)
    os.makedirs(outdir, exist_ok=True)
    model_path = os.path.join(outdir, args.model_name)
    model.save(model_path)
    log.info("model written to %s", model_path)
    if cost_rows is not None:
        log_path = os.path.join(outdir, "training_log.csv")
        labels = split.train.score_set.labels
        with open(log_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration"] + [f"cost_{lb}" for lb in labels])
            for it, costs in cost_rows:
                w.writerow([it] + [format(c, ".10g") for c in costs])
        log.info("training log written to %s", log_path)
    return 0


def cmd_evaluate(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if cfg.like_threshold is None:
        raise ConfigError("evaluation.like_threshold: required by evaluate")
    outdir = args.output_dir or cfg.output_dir
    model_path = args.model or os.path.join(outdir, MODEL_FILENAME)
    split = _materialize_split(cfg)
    kind, model = _load_model(model_path)
    _check_model_matches(model, split, model_path)

    users, items = split.test_users, split.test_items
    actual = _test_values(split)
    thresholds = cfg.reliability_thresholds
    theta = cfg.like_threshold
    n = cfg.top_n
    score_values = np.asarray(split.train.score_set.values)
    num_scores = len(split.train.score_set)

    if kind == "bemf":
        _, pred_idx, rho = model.predict_batch(users, items)
        pred_values = score_values[pred_idx]
        reliability_source = "native"
        reliabilities = rho

        def base_predict(u_arr, i_arr):
            _, idx, _ = model.predict_batch(u_arr, i_arr)
            return score_values[idx]
    else:
        pred_values = model.predict_batch(users, items)
        pred_idx = None
        reliabilities = None
        reliability_source = "none"
        base_predict = model.predict_batch

    if cfg.reliability_addon:
        log.info("fitting reliability add-on on training errors")
        addon = enforce_reliability(base_predict, split.train,
                                    cfg.addon_config())
        reliabilities = addon.reliability_batch(users, items)
        reliability_source = "addon"

    predicted = np.isfinite(pred_values)
    mae0 = ev.mae(actual, pred_values)
    cov0 = ev.coverage(pred_values)

    if reliabilities is not None:
        rpi_value = ev.rpi(reliabilities[predicted],
                           np.abs(actual - pred_values)[predicted])
        prediction_curve = ev.prediction_sweep(pred_values, reliabilities,
                                               actual, thresholds)
        histogram = ev.reliability_histogram(reliabilities)
    else:
        rpi_value = None
        prediction_curve = ev.prediction_sweep(
            pred_values, np.ones_like(pred_values), actual, [0.0])
        histogram = None

    if kind == "bemf":
        recommendation_curve = ev.recommendation_sweep(
            model, users, items, actual, thresholds, n, theta)
        recs0 = ev.recommend_by_reliability(model, users, items, n, theta)
        precision, recall = ev.precision_recall_at_n(recs0, users, items,
                                                     actual, theta)
    else:
        recs0 = ev.recommend_by_prediction(pred_values, users, items, n, theta)
        precision, recall = ev.precision_recall_at_n(recs0, users, items,
                                                     actual, theta)
        recommendation_curve = [ev.RecommendationPoint(0.0, precision, recall)]

    confusion = None
    if pred_idx is not None:
        confusion = ev.confusion_matrix(split.test_scores, pred_idx, num_scores)

    report = ev.EvalReport(
        model_kind=kind,
        score_labels=list(split.train.score_set.labels),
        num_test=split.num_test,
        like_value=theta,
        top_n=n,
        mae=mae0,
        coverage=cov0,
        rpi=rpi_value,
        precision=precision,
        recall=recall,
        prediction_curve=prediction_curve,
        recommendation_curve=recommendation_curve,
        confusion=confusion,
        histogram=histogram,
        extra_rows=[("reliability_source", reliability_source)],
    )
    written = report.write(outdir)
    for path in written:
        log.info("wrote %s", path)
    print(f"mae={ev.fmt(mae0)} coverage={ev.fmt(cov0)} "
          f"rpi={ev.fmt(rpi_value)} precision={ev.fmt(precision)} "
          f"recall={ev.fmt(recall)}")
    return 0


def cmd_grid_search(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    size = cfg.grid_size()
    if args.dry_run:
        print(size)
        return 0
    if args.max_cells is not None and size > args.max_cells:
        raise ConfigError(
            f"grid has {size} cells, over the --max-cells limit of "
            f"{args.max_cells}")
    outdir = args.output_dir or cfg.output_dir
    split = _materialize_split(cfg)
    actual = _test_values(split)
    axes = [name for name, _ in cfg.grid_axes()]
    log.info("grid search over %d cells (%s)", size, ", ".join(axes) or "none")

    rows = []
    for idx, overrides in cfg.grid_cells():
        try:
            model = _fit_model(cfg, split, args.workers, overrides=overrides)
        except TrainingDivergedError as exc:
            log.warning("cell %d diverged: %s", idx, exc)
            rows.append((idx, overrides, None, 0.0))
            continue
        if isinstance(model, BeMFModel):
            _, pred_idx, _ = model.predict_batch(split.test_users,
                                                 split.test_items)
            pred_values = np.asarray(split.train.score_set.values)[pred_idx]
        else:
            pred_values = model.predict_batch(split.test_users,
                                              split.test_items)
        cell_mae = ev.mae(actual, pred_values)
        cell_cov = ev.coverage(pred_values)
        rows.append((idx, overrides, cell_mae, cell_cov))
        log.info("cell %d/%d %s mae=%s", idx + 1, size, overrides,
                 ev.fmt(cell_mae))

    rows.sort(key=lambda r: (r[2] is None, r[2] if r[2] is not None else 0.0,
                             r[0]))
    os.makedirs(outdir, exist_ok=True)
    out_path = os.path.join(outdir, "grid_results.csv")
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cell"] + axes + ["mae", "coverage"])
        for idx, overrides, cell_mae, cell_cov in rows:
            w.writerow([idx] + [ev.fmt(overrides[a]) for a in axes]
                       + [ev.fmt(cell_mae), ev.fmt(cell_cov)])
    log.info("grid results written to %s", out_path)
    best = rows[0]
    print(f"best cell {best[0]} {best[1]} mae={ev.fmt(best[2])}")
    return 0


def cmd_split(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    sp = cfg.split_section
    if "test_ratio" not in sp:
        raise ConfigError("split: the split command needs a test_ratio split")
    outdir = args.output_dir or cfg.output_dir
    split = _materialize_split(cfg)
    os.makedirs(outdir, exist_ok=True)
    sep = cfg.separator
    train_path = os.path.join(outdir, "train.txt")
    with open(train_path, "w", encoding="utf-8") as fh:
        for line in split.train.to_lines(sep):
            fh.write(line + "\n")
    test_path = os.path.join(outdir, "test.txt")
    train = split.train
    labels = train.score_set.labels
    with open(test_path, "w", encoding="utf-8") as fh:
        for u, i, s in split.test_triples():
            fh.write(f"{train.user_ids[u]}{sep}{train.item_ids[i]}"
                     f"{sep}{labels[s]}\n")
    print(f"train={split.train.num_ratings} test={split.num_test} "
          f"({train_path}, {test_path})")
    return 0


def cmd_info(args) -> int:
    if args.model:
        kind, meta, arrays = load_container(args.model)
        print(f"kind: {kind}")
        print(f"score_set: {', '.join(meta.get('score_set', []))}")
        print(f"users: {len(meta.get('user_ids', []))}")
        print(f"items: {len(meta.get('item_ids', []))}")
        for key, value in sorted(meta.items()):
            if key in ("score_set", "user_ids", "item_ids"):
                continue
            print(f"{key}: {value}")
        for name in sorted(arrays):
            print(f"array {name}: shape {tuple(arrays[name].shape)}")
        return 0
    cfg = ExperimentConfig.from_file(args.config)
    dataset = _load_dataset(cfg)
    counts = dataset.score_counts()
    density = (dataset.num_ratings / (dataset.num_users * dataset.num_items)
               if dataset.num_users and dataset.num_items else 0.0)
    print(f"users: {dataset.num_users}")
    print(f"items: {dataset.num_items}")
    print(f"ratings: {dataset.num_ratings}")
    print(f"density: {density:.6f}")
    print(f"backend: {backend.active_backend()}")
    for label, count in zip(dataset.score_set.labels, counts):
        print(f"score {label}: {int(count)}")
    return 0


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bemf",
        description="Bernoulli matrix factorization recommender: "
                    "probability distributions over scores with native "
                    "prediction reliabilities, plus rating-scale MF and "
                    "KNN baselines.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="experiment config JSON")
        p.add_argument("--output-dir", default=None,
                       help="override the config's output_dir")

    p = sub.add_parser("train", help="fit the configured model and save it")
    add_common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="threads for the per-score loop "
                        "(default: BEMF_WORKERS or 1)")
    p.add_argument("--model-name", default=MODEL_FILENAME,
                   help="model file name inside the output dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="measure a trained model on the test split")
    add_common(p)
    p.add_argument("--model", default=None,
                   help="model file (default: <output_dir>/model.bemf)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search",
                       help="fit every combination of list-valued model "
                            "knobs and rank by test MAE")
    add_common(p)
    p.add_argument("--dry-run", action="store_true",
                   help="print the number of grid cells and exit")
    p.add_argument("--max-cells", type=int, default=None,
                   help="refuse to run grids larger than this")
    p.add_argument("--workers", type=int, default=None,
                   help="threads for each cell's per-score loop")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("split",
                       help="materialize the train/test split as text files")
    add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("info", help="describe a dataset or a model file")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--model", default=None, help="model file to describe")
    p.add_argument("--output-dir", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.command == "info" and not (args.config or args.model):
        log.error("info needs --config or --model")
        return 2
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        log.error("%s", exc)
        return 1
    except (ConfigError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return 2
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
