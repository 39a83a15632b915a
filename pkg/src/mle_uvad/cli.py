"""Command-line interface: generate, train, score, eval, sweep.

Every command is reproducible from its ``--seed``: dataset generation uses
the seed directly, training runs use it for weight init and shuffling, and
sweeps derive one seed per cell (``seed + cell_index``, so a one-cell sweep
follows the exact seed path of a plain training run). Ratio-axis sweeps
additionally derive a resampling seed per cell with a fixed purpose offset.

Flags override a flat ``key = value`` config file, which overrides the
defaults; the effective configuration is printed at startup. Exit codes:
0 success, 2 usage or validation, 3 I/O or malformed file, 4 numerical
failure. Set MLE_UVAD_LOG={quiet,info,debug} to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .dataio import (
    ANOMALY_MODES,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    subsample_to_ratio,
)
from .detect import (
    pcc_gap,
    read_scores_csv,
    roc_auc,
    score_series,
    with_threshold,
    write_scores_csv,
)
from .errors import DataFormatError, NumericalError
from .model import load_model, save_model
from .trainer import TrainConfig, run_training, sweep, write_epoch_log_csv

log = logging.getLogger("mle_uvad")

# Purpose offset so ratio-axis resampling never shares a stream with training.
SUBSAMPLE_SEED_OFFSET = 100003

# config-file key -> (attribute on the parsed args, converter)
_CONFIG_KEYS = {
    "lambda": ("mle_weight", float),
    "sigma": ("bandwidth", float),
    "kappa": ("kappa", float),
    "lr": ("learning_rate", float),
    "learning_rate": ("learning_rate", float),
    "batch": ("batch_size", int),
    "batch_size": ("batch_size", int),
    "epochs": ("epochs", int),
    "seed": ("seed", int),
    "layers": ("layer_sizes", str),
    "layer_sizes": ("layer_sizes", str),
    "mse_variant": ("mse_variant", str),
    "data": ("data", str),
    "out": ("out", str),
    "log": ("log_csv", str),
    "model": ("model", str),
    "scores": ("scores", str),
    "axis": ("axis", str),
    "grid": ("grid", str),
    "size": ("size", str),
    "frames": ("frames", int),
    "ratio": ("ratio", float),
    "mode": ("mode", str),
    "noise": ("noise", float),
}


def _setup_logging():
    level = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("MLE_UVAD_LOG", "info").lower(), logging.INFO
    )
    logging.basicConfig(level=level, format="%(message)s", force=True)


def _parse_config_file(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


def _parse_layers(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"layers must be comma-separated integers, got {text!r}") from exc
    if not sizes:
        raise ValueError("layers must contain at least the latent dimension")
    return sizes


def _apply_config_file(args):
    """Fill unset args from the config file; flags always win."""
    if not getattr(args, "config", None):
        return args
    raw = _parse_config_file(args.config)
    for key, text in raw.items():
        entry = _CONFIG_KEYS.get(key)
        if entry is None:
            log.info("config: ignoring unknown key %r", key)
            continue
        dest, conv = entry
        if not hasattr(args, dest):
            log.info("config: ignoring key %r (not used by this command)", key)
            continue
        if getattr(args, dest) is None:
            try:
                setattr(args, dest, conv(text))
            except ValueError as exc:
                raise ValueError(f"config key {key!r}: {exc}") from exc
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            flag = {"log_csv": "--log"}.get(name, f"--{name}")
            raise ValueError(f"missing required setting {flag} (flag or config file)")


def _build_train_config(args) -> TrainConfig:
    """Resolve train settings: flag or config-file value or default."""
    defaults = TrainConfig()
    merged = {}
    for dest in ("mle_weight", "bandwidth", "kappa", "learning_rate", "batch_size",
                 "epochs", "seed", "layer_sizes", "mse_variant"):
        value = getattr(args, dest, None)
        merged[dest] = getattr(defaults, dest) if value is None else value
    if isinstance(merged["layer_sizes"], str):
        merged["layer_sizes"] = _parse_layers(merged["layer_sizes"])
    config = TrainConfig(**merged)
    config.validate()
    for key in ("mle_weight", "bandwidth", "kappa", "learning_rate", "batch_size",
                "epochs", "seed", "layer_sizes", "mse_variant"):
        log.info("config: %s = %s", key, getattr(config, key))
    return config


def _parse_size(text: str):
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"size must look like 24x24, got {text!r}")
    return int(parts[0]), int(parts[1])


def _add_config_flag(parser):
    parser.add_argument("--config", type=str, default=None,
                        help="flat key = value config file; flags take precedence")


def _add_train_flags(parser):
    parser.add_argument("--lambda", dest="mle_weight", type=float, default=None,
                        help="weight of the latent-entropy loss term")
    parser.add_argument("--sigma", dest="bandwidth", type=float, default=None,
                        help="kernel bandwidth of the entropy estimator")
    parser.add_argument("--kappa", type=float, default=None,
                        help="detection threshold multiplier")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch", dest="batch_size", type=int, default=None)
    parser.add_argument("--lr", dest="learning_rate", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--layers", dest="layer_sizes", type=str, default=None,
                        help="encoder widths, e.g. 128,64,32 (last = latent dim)")
    parser.add_argument("--mse-variant", dest="mse_variant", choices=["norm", "squared"],
                        default=None)
    _add_config_flag(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mle-uvad",
        description="Unsupervised video-frame anomaly detection with a "
                    "latent-entropy-regularized autoencoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic benchmark dataset")
    gen.add_argument("--size", type=str, default=None, help="frame size HxW (default 24x24)")
    gen.add_argument("--frames", type=int, default=None)
    gen.add_argument("--ratio", type=float, default=None)
    gen.add_argument("--mode", choices=list(ANOMALY_MODES), default=None)
    gen.add_argument("--noise", type=float, default=None)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", type=str, default=None)
    _add_config_flag(gen)

    tr = sub.add_parser("train", help="train a model on a dataset file")
    tr.add_argument("--data", type=str, default=None)
    tr.add_argument("--out", type=str, default=None, help="model output path")
    tr.add_argument("--log", dest="log_csv", type=str, default=None,
                    help="per-epoch metrics CSV output path")
    _add_train_flags(tr)

    sc = sub.add_parser("score", help="score a dataset with a trained model")
    sc.add_argument("--model", type=str, default=None)
    sc.add_argument("--data", type=str, default=None)
    sc.add_argument("--out", type=str, default=None, help="scores CSV output path")
    sc.add_argument("--kappa", type=float, default=None)
    _add_config_flag(sc)

    ev = sub.add_parser("eval", help="metrics from a labeled scores CSV")
    ev.add_argument("--scores", type=str, default=None)
    _add_config_flag(ev)

    sw = sub.add_parser("sweep", help="grid of training runs along one axis")
    sw.add_argument("--data", type=str, default=None)
    sw.add_argument("--axis", choices=["sigma", "lambda", "ratio"], default=None)
    sw.add_argument("--grid", type=str, default=None, help="comma-separated values")
    sw.add_argument("--out", type=str, default=None, help="sweep table CSV path")
    _add_train_flags(sw)
    return parser


def cmd_generate(args) -> int:
    _require(args, "out")
    defaults = SyntheticSpec()
    height, width = _parse_size(args.size or f"{defaults.height}x{defaults.width}")
    spec = SyntheticSpec(
        height=height,
        width=width,
        frame_count=defaults.frame_count if args.frames is None else args.frames,
        anomaly_ratio=defaults.anomaly_ratio if args.ratio is None else args.ratio,
        anomaly_mode=args.mode or defaults.anomaly_mode,
        noise_std=defaults.noise_std if args.noise is None else args.noise,
        seed=0 if args.seed is None else args.seed,
    )
    if spec.anomaly_mode not in ANOMALY_MODES:
        raise ValueError(f"unknown anomaly mode {spec.anomaly_mode!r}")
    dataset = generate_synthetic(spec)
    save_dataset(dataset, args.out)
    print(f"T={dataset.frame_count} D={dataset.frame_dim} anomalies={dataset.anomaly_count}")
    log.info("dataset written to %s", args.out)
    return 0


def cmd_train(args) -> int:
    _require(args, "data", "out", "log_csv")
    config = _build_train_config(args)
    dataset = load_dataset(args.data)
    params, logs = run_training(dataset.frames, config, dataset.labels)
    save_model(params, args.out)
    write_epoch_log_csv(args.log_csv, logs)
    last = logs[-1]
    auc = "" if last.auc is None else f" auc={last.auc:.6f}"
    print(f"epoch={last.epoch} mse={last.mse:.6f} mle={last.mle:.6f} "
          f"total={last.total:.6f} mean_pcc={last.mean_pcc:.6f}{auc}")
    log.info("model written to %s, epoch log to %s", args.out, args.log_csv)
    return 0


def cmd_score(args) -> int:
    _require(args, "model", "data", "out")
    kappa = 0.5 if args.kappa is None else args.kappa
    params = load_model(args.model)
    dataset = load_dataset(args.data)
    if dataset.frame_dim != params.frame_dim:
        raise ValueError(
            f"dataset frame dim {dataset.frame_dim} does not match model frame dim "
            f"{params.frame_dim}"
        )
    series = with_threshold(score_series(params, dataset.frames), kappa)
    write_scores_csv(args.out, series, dataset.labels)
    print(f"mu={series.mu:.6f} sd={series.sd:.6f} kappa={series.kappa} tau={series.tau:.6f}")
    log.info("scores written to %s", args.out)
    return 0


def cmd_eval(args) -> int:
    _require(args, "scores")
    series, labels = read_scores_csv(args.scores)
    if labels is None:
        raise ValueError(f"scores file {args.scores} has no label column")
    auc = roc_auc(series.anomaly_score, labels)
    gap = pcc_gap(series.pcc, labels)
    normal = series.pcc[~labels]
    anomalous = series.pcc[labels]
    flags = series.flags
    tp = int((flags & labels).sum())
    fp = int((flags & ~labels).sum())
    fn = int((~flags & labels).sum())
    tn = int((~flags & ~labels).sum())
    print(f"auc={auc:.6f}")
    print(f"mean_pcc_normal={normal.mean():.6f} mean_pcc_anomaly={anomalous.mean():.6f} "
          f"pcc_gap={gap:.6f}")
    print(f"tp={tp} fp={fp} fn={fn} tn={tn}")
    return 0


def cmd_sweep(args) -> int:
    _require(args, "data", "axis", "grid", "out")
    if args.axis not in ("sigma", "lambda", "ratio"):
        raise ValueError(f"axis must be sigma, lambda or ratio, got {args.axis!r}")
    base = _build_train_config(args)
    dataset = load_dataset(args.data)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"grid must be comma-separated numbers, got {args.grid!r}") from exc
    if not grid:
        raise ValueError("grid is empty")

    rows = []
    if args.axis == "sigma":
        for cell in sweep(dataset.frames, base, grid, [base.mle_weight], dataset.labels):
            rows.append((cell.bandwidth, cell.auc, cell.pcc_gap, cell.status))
    elif args.axis == "lambda":
        for cell in sweep(dataset.frames, base, [base.bandwidth], grid, dataset.labels):
            rows.append((cell.mle_weight, cell.auc, cell.pcc_gap, cell.status))
    else:  # ratio
        if dataset.labels is None:
            raise ValueError("ratio sweeps need a labeled dataset")
        for k, ratio in enumerate(grid):
            config = replace(base, seed=base.seed + k)
            try:
                sub = subsample_to_ratio(
                    dataset, ratio, seed=base.seed + SUBSAMPLE_SEED_OFFSET + k
                )
                params, logs = run_training(sub.frames, config, sub.labels)
                series = score_series(params, sub.frames)
                rows.append((ratio, logs[-1].auc, pcc_gap(series.pcc, sub.labels), "ok"))
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                rows.append((ratio, None, None, f"error: {exc}"))

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "value", "auc", "pcc_gap", "status"])
        for value, auc, gap, status in rows:
            writer.writerow(
                [args.axis, repr(float(value)),
                 "" if auc is None else repr(float(auc)),
                 "" if gap is None else repr(float(gap)), status]
            )
    for value, auc, gap, status in rows:
        print(f"{args.axis}={value} auc={'' if auc is None else f'{auc:.6f}'} status={status}")
    log.info("sweep table written to %s", args.out)
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        _apply_config_file(args)
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
