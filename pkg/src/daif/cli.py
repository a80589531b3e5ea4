"""``daif`` command line: train, eval, augment-preview, bench, synth.

Exit codes: 0 success, 2 configuration/validation, 3 numeric failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from daif.augment import AugmentationConfig, Strategy, augment
from daif.config import ConfigError, ExperimentConfig, load_config
from daif.data import (LoadError, SplitError, Window, WindowSet, load_csv, split,
                       standardize, synth_generate, window_count, write_csv)
from daif.model import (ConfigurationError, DataError, ModelConfig, load_checkpoint,
                        save_checkpoint)
from daif.results import ResultRow, write_results
from daif.spectral import max_top_k
from daif.tensor import NonFiniteError
from daif.train import (TrainingDiverged, correlation_matrix, evaluate, pearson_rows,
                        train_model, write_history_csv, write_matrix_csv)

log = logging.getLogger("daif")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DEFAULT_TONES = [(1 / 24, 1 / 12), (1 / 48, 1 / 16), (1 / 32, 1 / 6), (1 / 96, 1 / 24)]


class UsageError(ValueError):
    pass


# helpers ---------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sweep_arg(text: str) -> tuple[str, list[int]]:
    axis, _, values = text.partition("=")
    axis = axis.strip().upper()
    if axis not in ("P", "K") or not values:
        raise argparse.ArgumentTypeError(f"--sweep expects P=LIST or K=LIST, got {text!r}")
    return axis, _int_list(values)


def _tones(text: str) -> list[tuple[float, ...]]:
    try:
        return [tuple(float(Fraction(f.strip())) for f in group.split(",") if f.strip())
                for group in text.split(";")]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"cannot parse frequencies {text!r}") from None


def _apply_overrides(exp: ExperimentConfig, args) -> ExperimentConfig:
    aug = exp.augmentation
    if getattr(args, "strategy", None):
        aug = replace(aug, strategy=Strategy(args.strategy))
    if getattr(args, "patch_len", None):
        aug = replace(aug, patch_length=args.patch_len)
    if getattr(args, "top_k", None):
        aug = replace(aug, top_k=args.top_k)
    model = dict(exp.model)
    if getattr(args, "backbone", None):
        model["backbone"] = args.backbone
    exp = replace(exp, augmentation=aug, model=model)
    if getattr(args, "seeds", None):
        exp = replace(exp, seeds=args.seeds)
    if getattr(args, "pred_len", None):
        exp = replace(exp, pred_lengths=args.pred_len)
    if getattr(args, "out", None):
        exp = replace(exp, output_dir=Path(args.out))
    if getattr(args, "sweep", None):
        exp = replace(exp, sweep=dict(args.sweep))
    try:
        exp.model_config(exp.pred_lengths[0]).augmentation.validate_for(exp.lookback)
    except ValueError as exc:
        raise ConfigError("<values>", str(exc)) from exc
    return exp


_handlers: list[logging.Handler] = []


def _setup_log(out: Path) -> None:
    # wall-clock timestamps go here and nowhere else
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    _handlers.append(handler)


def _cell_name(dataset: str, cfg: ModelConfig, S: int, seed: int) -> str:
    aug = cfg.augmentation
    tag = aug.strategy.value
    if aug.strategy in (Strategy.CVP, Strategy.COMPOUND):
        tag += f"-P{aug.patch_length}"
    if aug.strategy in (Strategy.FF, Strategy.COMPOUND):
        tag += f"-K{aug.top_k}"
    return f"{dataset}_{cfg.backbone.value}_{tag}_S{S}_seed{seed}"


def _pk(aug: AugmentationConfig) -> tuple[int | str, int | str]:
    P = aug.patch_length if aug.strategy in (Strategy.CVP, Strategy.COMPOUND) else ""
    K = aug.top_k if aug.strategy in (Strategy.FF, Strategy.COMPOUND) else ""
    return P, K


def _load_series(exp: ExperimentConfig):
    return load_csv(exp.dataset_path)


def train_cell(exp: ExperimentConfig, series, S: int, seed: int,
               aug: AugmentationConfig | None = None, out: Path | None = None,
               record_timing: bool = False) -> ResultRow:
    """Train and test one (S, seed) cell; optionally write checkpoint + history."""
    cfg = exp.model_config(S, aug)
    splits = split(series, exp.split, cfg.lookback, S)
    result = train_model(splits, cfg, exp.train_config(seed))
    report = evaluate(result.params, WindowSet(splits.test, cfg.lookback, S), cfg, seed)
    name = _cell_name(exp.dataset_name, cfg, S, seed)
    log.info("%s: best epoch %d, test mse %.6f mae %.6f, %.1fs",
             name, result.best_epoch, report.mse, report.mae, result.seconds)
    if out is not None:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        (out / "history").mkdir(parents=True, exist_ok=True)
        meta = {"dataset": exp.dataset_name, "S": S, "seed": seed,
                "best_epoch": result.best_epoch,
                "train_seconds": round(result.seconds, 3) if record_timing else 0.0}
        save_checkpoint(out / "checkpoints" / f"{name}.json", cfg, result.params, meta)
        write_history_csv(out / "history" / f"{name}.csv", result.history, record_timing)
    P, K = _pk(cfg.augmentation)
    return ResultRow(exp.dataset_name, cfg.backbone.value, cfg.augmentation.strategy.value,
                     S, P, K, seed, report.mse, report.mae,
                     result.seconds if record_timing else 0.0)


# commands --------------------------------------------------------------------

def cmd_train(args) -> int:
    exp = _apply_overrides(load_config(args.config), args)
    out = exp.output_dir
    _setup_log(out)
    series = _load_series(exp)
    rows = []
    for S in exp.pred_lengths:
        for seed in exp.seeds:
            rows.append(train_cell(exp, series, S, seed, out=out, record_timing=args.record_timing))
    write_results(out / "results.csv", rows)
    print(f"wrote {len(rows)} cells to {out / 'results.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    exp = _apply_overrides(load_config(args.config), args)
    out = exp.output_dir
    _setup_log(out)
    series = _load_series(exp)
    rows = []
    for path in args.checkpoint:
        cfg, params, meta = load_checkpoint(path)
        want = (exp.lookback, exp.model.get("d_model", cfg.d_model), series.n_vars)
        have = (cfg.lookback, cfg.d_model, params.n_vars)
        if want != have:
            raise ConfigError(
                "checkpoint", f"{path}: checkpoint (T, D, N)={have} but config/dataset give {want}")
        S = cfg.horizon
        if args.pred_len and S not in args.pred_len:
            raise ConfigError("checkpoint", f"{path}: horizon {S} not in --pred-len {args.pred_len}")
        seed = int(meta.get("seed", 0))
        splits = split(series, exp.split, cfg.lookback, S)
        report = evaluate(params, WindowSet(splits.test, cfg.lookback, S), cfg, seed)
        P, K = _pk(cfg.augmentation)
        rows.append(ResultRow(exp.dataset_name, cfg.backbone.value, cfg.augmentation.strategy.value,
                              S, P, K, seed, report.mse, report.mae,
                              float(meta.get("train_seconds", 0.0))))
    target = out / "eval_results.csv"
    write_results(target, rows)
    print(f"wrote {len(rows)} rows to {target}")
    return EXIT_OK


def _write_values(path: Path, header, matrix) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.atleast_2d(matrix):
            w.writerow([repr(float(v)) for v in row])


def cmd_augment_preview(args) -> int:
    if args.config:
        exp = _apply_overrides(load_config(args.config), args)
        series = _load_series(exp)
        aug_cfg = exp.augmentation
        lookback = exp.lookback
    else:
        if not args.dataset:
            raise UsageError("augment-preview needs --dataset or --config")
        series = load_csv(args.dataset)
        aug_cfg = AugmentationConfig(strategy=Strategy(args.strategy or "ff"),
                                     patch_length=args.patch_len or 16, top_k=args.top_k or 5)
        lookback = args.lookback
    try:
        aug_cfg.validate_for(lookback)
    except ValueError as exc:
        raise ConfigError("<values>", str(exc)) from exc
    count = window_count(len(series), lookback, 0)
    if not 0 <= args.window < count:
        raise UsageError(f"window index {args.window} outside [0, {count})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    raw = series.values[args.window: args.window + lookback]
    x = standardize(Window(raw, raw[:0])).x
    aug = augment(x, aug_cfg, np.random.default_rng([aug_cfg.rng_seed, args.window]))
    names = series.variate_names
    _write_values(out / "original.csv", names, x)
    for group in aug.groups:
        tag = group.tag.value
        if group.tag is Strategy.CVP:
            _write_values(out / f"tokens_{tag}.csv",
                          [f"j{j}" for j in range(group.token_length)], group.tokens)
            labels = [f"patch{m}" for m in range(group.count)]
            write_matrix_csv(out / f"correlation_{tag}.csv", pearson_rows(group.tokens), labels)
        else:
            _write_values(out / f"tokens_{tag}.csv", [f"t{t}" for t in range(lookback)], group.tokens)
            _write_values(out / f"augmented_{tag}.csv", names, group.tokens.T)
            labels = list(names) + [f"{tag}:{n}" for n in names]
            write_matrix_csv(out / f"correlation_{tag}.csv",
                             correlation_matrix(x, group.tokens), labels)
    print(f"wrote preview for window {args.window} ({aug.count} augmented tokens) to {out}")
    return EXIT_OK


def _bench_cell(exp, series, axis, value, seed, kind):
    aug = exp.augmentation
    if axis == "P":
        aug = replace(aug, strategy=Strategy.CVP, patch_length=value)
        tokens = exp.lookback // value
    else:
        aug = replace(aug, strategy=Strategy.FF, top_k=value)
        tokens = series.n_vars
    try:
        aug.validate_for(exp.lookback)
        rows = [train_cell(exp, series, S, seed, aug) for S in exp.pred_lengths]
    except (ValueError, FloatingPointError) as exc:
        log.warning("cell %s=%s seed %s failed: %s", axis, value, seed, exc)
        return [axis, value, seed, kind, tokens, "", "", f"error: {exc}"]
    mse = sum(r.mse for r in rows) / len(rows)
    mae = sum(r.mae for r in rows) / len(rows)
    return [axis, value, seed, kind, tokens, f"{mse:.6f}", f"{mae:.6f}", "ok"]


def cmd_bench(args) -> int:
    exp = _apply_overrides(load_config(args.config), args)
    if not exp.sweep:
        raise ConfigError("sweep", "no sweep axes given (config 'sweep' or --sweep AXIS=LIST)")
    out = exp.output_dir
    _setup_log(out)
    series = _load_series(exp)
    cells = []
    for axis, values in sorted(exp.sweep.items()):
        grid = [(v, "grid") for v in values]
        if axis == "K":
            kmax = max_top_k(exp.lookback)
            grid.append((kmax, "max_k"))
        for value, kind in grid:
            for seed in exp.seeds:
                cells.append((axis, value, seed, kind))
    workers = max(1, int(os.environ.get("DAIF_THREADS", "1")))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda c: _bench_cell(exp, series, *c), cells))
    rows.sort(key=lambda r: (r[0], r[3] != "grid", r[1], r[2]))
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "seed", "kind", "M", "mse", "mae", "status"])
        w.writerows(rows)
    print(f"wrote {len(rows)} sweep cells to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    tones = args.freqs or [DEFAULT_TONES[n % len(DEFAULT_TONES)] for n in range(args.n_vars)]
    if len(tones) != args.n_vars:
        raise UsageError(f"{len(tones)} frequency groups for {args.n_vars} variates")
    series = synth_generate(args.n_vars, args.length, tones, args.noise, args.seed, args.trend)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out)
    print(f"wrote {args.length} rows x {args.n_vars} variates to {out}")
    return EXIT_OK


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daif", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment JSON file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seeds", type=_int_list)
        p.add_argument("--strategy", choices=[s.value for s in Strategy])
        p.add_argument("--backbone", choices=["attention", "mlp"])
        p.add_argument("--pred-len", type=_int_list)
        p.add_argument("--patch-len", type=int)
        p.add_argument("--top-k", type=int)

    p = sub.add_parser("train", help="train one checkpoint per (S, seed)")
    overrides(p)
    p.add_argument("--record-timing", action="store_true",
                   help="write wall-clock seconds into CSVs (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints on the test split")
    overrides(p)
    p.add_argument("--checkpoint", nargs="+", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment-preview", help="dump one window and its augmented tokens as CSV")
    overrides(p, config_required=False)
    p.add_argument("--dataset", help="CSV file (used when --config is absent)")
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--lookback", type=int, default=96)
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("bench", help="P / K sensitivity sweep")
    overrides(p)
    p.add_argument("--sweep", type=_sweep_arg, action="append", metavar="AXIS=LIST")
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a seeded sum-of-sinusoids dataset")
    p.add_argument("--n-vars", type=int, default=4)
    p.add_argument("--length", type=int, default=4000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--trend", type=float, default=0.0)
    p.add_argument("--freqs", type=_tones, help="per-variate tones, e.g. '1/24,1/12;1/48,1/16'")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, UsageError, SplitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, NonFiniteError, DataError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LoadError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        while _handlers:
            h = _handlers.pop()
            logging.getLogger().removeHandler(h)
            h.close()


if __name__ == "__main__":
    sys.exit(main())
