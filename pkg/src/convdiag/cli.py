"""Command-line front end: prepare, train, eval, predict, export-features.

One JSON config drives a run (see configs/ for presets). Exit codes are
a stable scripting contract: 0 success, 2 input/config error, 3
numerical divergence. Every command validates its config and inputs
before writing anything, so a failing command leaves no partial
artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data as dp
from . import trainer as tr
from .errors import ConfigError, ConvdiagError, DivergenceError
from .metrics import format_report, report_to_json
from .optim import make_optimizer


def _load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} at byte "
                          f"offset {exc.pos}") from exc


class RunConfig:
    """Validated view of the run config JSON (kept verbatim in .raw for
    checkpoint provenance)."""

    DATASET_KEYS = {"manifest", "window_len", "crop_n", "train_fraction",
                    "seed", "standardize", "task"}
    OUTPUT_KEYS = {"bundle_dir", "checkpoint", "log", "report"}

    def __init__(self, raw: dict, base_dir: Path):
        self.raw = raw
        for section in ("dataset", "model", "training", "output"):
            if section not in raw or not isinstance(raw[section], dict):
                raise ConfigError(f"config is missing the {section!r} section")
        ds = raw["dataset"]
        unknown = set(ds) - self.DATASET_KEYS
        if unknown:
            raise ConfigError(f"unknown dataset config keys {sorted(unknown)}")
        if "manifest" not in ds or "window_len" not in ds:
            raise ConfigError("dataset section needs 'manifest' and 'window_len'")
        self.manifest = base_dir / str(ds["manifest"])
        self.window_len = int(ds["window_len"])
        if self.window_len < 1:
            raise ConfigError(f"window_len must be positive, got {self.window_len}")
        self.crop_n = None if ds.get("crop_n") in (None, 0) else int(ds["crop_n"])
        self.train_fraction = float(ds.get("train_fraction", 0.9))
        self.dataset_seed = int(ds.get("seed", 0))
        self.standardize = bool(ds.get("standardize", True))
        self.task = str(ds.get("task", "classification"))
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"dataset task must be classification or regression, "
                              f"got {self.task!r}")

        self.model = tr.ModelConfig.from_dict(raw["model"])
        self.training = tr.TrainConfig.from_dict(raw["training"])

        out = raw["output"]
        unknown = set(out) - self.OUTPUT_KEYS
        if unknown:
            raise ConfigError(f"unknown output config keys {sorted(unknown)}")
        for key in ("bundle_dir", "checkpoint", "log"):
            if key not in out:
                raise ConfigError(f"output section needs {key!r}")
        self.bundle_dir = base_dir / str(out["bundle_dir"])
        self.checkpoint = base_dir / str(out["checkpoint"])
        self.log_path = base_dir / str(out["log"])
        self.report_prefix = base_dir / str(out["report"]) if "report" in out else None

    def override_seed(self, seed) -> None:
        """--seed replaces every seed in the run (dataset and training)."""
        if seed is None:
            return
        self.dataset_seed = int(seed)
        self.training.seed = int(seed)
        self.raw["dataset"]["seed"] = int(seed)
        self.raw["training"]["seed"] = int(seed)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return RunConfig(_load_json(path), base_dir=path.parent)


def cmd_prepare(args) -> int:
    cfg = load_run_config(args.config)
    cfg.override_seed(args.seed)
    recordings = dp.load_recordings(cfg.manifest, task=cfg.task)
    classes = cfg.model.classes if cfg.task == "classification" else None
    dataset, label_map, stats = dp.prepare_dataset(
        recordings, cfg.window_len, cfg.train_fraction, cfg.dataset_seed,
        crop_n=cfg.crop_n, do_standardize=cfg.standardize, task=cfg.task,
        classes=classes)
    channels = recordings[0].channels
    dp.write_bundle(cfg.bundle_dir, dataset, label_map, stats, cfg.task,
                    cfg.window_len, channels)
    total = len(dataset.train) + len(dataset.validation)
    print(f"prepared {total} samples (window {cfg.window_len}, "
          f"{channels} channel{'s' if channels != 1 else ''})")
    if label_map is not None:
        for name, count in dp.class_counts(dataset.train + dataset.validation,
                                           label_map).items():
            print(f"  {name}: {count}")
    print(f"split: {len(dataset.train)} train / {len(dataset.validation)} "
          f"validation (seed {cfg.dataset_seed})")
    print(f"bundle: {cfg.bundle_dir}")
    return 0


def _check_bundle_matches(cfg: RunConfig, bundle: dp.Bundle) -> None:
    if bundle.meta["task"] != cfg.task:
        raise ConfigError(f"bundle task {bundle.meta['task']!r} does not match "
                          f"config task {cfg.task!r}")
    if int(bundle.meta["window_len"]) != cfg.window_len:
        raise ConfigError(f"bundle window {bundle.meta['window_len']} does not "
                          f"match config window {cfg.window_len}")


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    cfg.override_seed(args.seed)
    bundle = dp.load_bundle(cfg.bundle_dir)
    _check_bundle_matches(cfg, bundle)
    input_shape = (int(bundle.meta["channels"]), cfg.window_len)
    model = tr.build_model(cfg.model, input_shape, label_map=bundle.label_map,
                           stats=bundle.stats, seed=cfg.training.seed)
    dataset = dp.SplitDataset(train=bundle.train, validation=bundle.validation,
                              seed=int(bundle.meta["seed"]),
                              train_fraction=float(bundle.meta["train_fraction"]))
    # own the optimizer so its state lands in the checkpoint (exact resume)
    optimizer = make_optimizer(cfg.training.optimizer,
                               learning_rate=cfg.training.learning_rate,
                               beta1=cfg.training.beta1, beta2=cfg.training.beta2,
                               eps=cfg.training.eps)
    log = tr.train(model, dataset, cfg.training, optimizer=optimizer)
    log.to_csv(cfg.log_path)
    tr.save_checkpoint(cfg.checkpoint, model, optimizer=optimizer,
                       iteration=cfg.training.max_iterations, run_config=cfg.raw)
    if dataset.validation:
        report = tr.evaluate(model, dataset.validation)
        print(format_report(report, task=_task_label(model)))
    print(f"checkpoint: {cfg.checkpoint}")
    print(f"log: {cfg.log_path}")
    return 0


def _task_label(model) -> str:
    if model.task == "classification":
        n = len(model.label_map) if model.label_map else model.head.n_classes
        return "binary classification" if n == 2 else f"{n}-way classification"
    return "regression"


def _eval_samples(args, ckpt):
    model = ckpt.model
    if args.bundle:
        bundle = dp.load_bundle(args.bundle)
        if bundle.meta["task"] != model.task:
            raise ConfigError(f"bundle task {bundle.meta['task']!r} does not match "
                              f"checkpoint task {model.task!r}")
        if args.split == "train":
            return bundle.train
        if args.split == "all":
            return bundle.train + bundle.validation
        return bundle.validation
    # manifest route: window at the checkpoint's input length, encode with
    # its label map, standardize with its stats
    recordings = dp.load_recordings(args.manifest, task=model.task)
    channels, window_len = model.input_shape
    samples = [s for r in recordings for s in dp.segment(r, window_len)]
    if model.task == "classification":
        if model.label_map is None:
            raise ConfigError("checkpoint has no label map; cannot encode labels")
        samples = dp.encode_targets(samples, model.label_map)
    else:
        samples = [dp.Sample(window=s.window, target=float(s.target)) for s in samples]
    if model.stats is not None:
        samples = dp.apply_stats(samples, model.stats)
    return samples


def cmd_eval(args) -> int:
    ckpt = tr.load_checkpoint(args.checkpoint)
    samples = _eval_samples(args, ckpt)
    report = tr.evaluate(ckpt.model, samples)
    text = format_report(report, task=_task_label(ckpt.model))
    print(text)
    if args.out:
        prefix = Path(args.out)
        if prefix.parent != Path(""):
            prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.json").write_text(report_to_json(report) + "\n")
        Path(f"{prefix}.txt").write_text(text + "\n")
        print(f"reports: {prefix}.json, {prefix}.txt")
    return 0


def cmd_predict(args) -> int:
    ckpt = tr.load_checkpoint(args.checkpoint)
    window = dp.read_recording_csv(args.window)
    prediction = tr.predict(ckpt.model, window)
    if prediction.task == "classification":
        label = prediction.label if prediction.label is not None else prediction.label_index
        print(f"label={label} confidence={prediction.confidence!r} "
              f"time_ms={prediction.elapsed_ms:.3f}")
    else:
        print(f"estimate={prediction.estimate!r} time_ms={prediction.elapsed_ms:.3f}")
    if args.decision_log:
        path = Path(args.decision_log)
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a") as fh:
            fh.write(json.dumps(prediction.decision_record(), sort_keys=True) + "\n")
    return 0


def cmd_export_features(args) -> int:
    ckpt = tr.load_checkpoint(args.checkpoint)
    samples = _eval_samples(args, ckpt)
    export = tr.export_features(ckpt.model, samples)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    export.to_csv(out)
    print(f"wrote {len(export.rows)} feature rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convdiag",
        description="1D-CNN fault classification and degradation regression "
                    "on sensor time series")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="window, label, split and standardize a corpus")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--seed", type=int, default=None, help="override every config seed")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on a prepared bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a bundle or manifest")
    p.add_argument("--checkpoint", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--bundle", help="prepared bundle directory")
    src.add_argument("--manifest", help="raw manifest CSV")
    p.add_argument("--split", choices=("validation", "train", "all"),
                   default="validation")
    p.add_argument("--out", default=None, help="report path prefix (.json/.txt)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify or score one raw window CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--window", required=True, help="recording CSV of one window")
    p.add_argument("--decision-log", default=None,
                   help="append the decision record to this JSONL file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-features", help="penultimate features + 2D projection")
    p.add_argument("--checkpoint", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--bundle")
    src.add_argument("--manifest")
    p.add_argument("--split", choices=("validation", "train", "all"), default="all")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_export_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConvdiagError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
