"""Command-line front end for training runs, sweeps, and budget tools.

Subcommands: train, eval, sweep, gradcheck, shrink, equivtest. Every run
echoes its effective configuration (flags > config file > defaults, all
seeds included) as a JSON header on stdout and as a ``# config:`` comment
at the top of any CSV it writes, so results are reproducible from the
artifacts alone. Outputs are byte-stable given identical flags.

Plotting stays out of process: ``scripts/plot_sweep.py`` consumes the sweep
CSVs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import budget
from . import data as data_mod
from . import model_io
from .feature_hash import run_equivalence_suite
from .training import (DivergenceError, TrainConfig, build_network, derive_seed,
                       distill_targets, evaluate, grad_check, train)

DATA_DIR_ENV = "HASHNN_DATA_DIR"
METHODS = ("hashed", "standard", "edge_removed", "low_rank")


class CliError(Exception):
    """Configuration problem with an actionable message."""


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise CliError(f"--arch must be comma-separated integers, got {text!r}")
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise CliError(f"--arch needs at least two positive widths, got {text!r}")
    return widths


def _parse_value(text: str) -> float:
    """Parse a sweep value, accepting fractions like 1/64."""
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"cannot parse value {text!r}")


def _resolve_data_path(path: str) -> str:
    if os.path.exists(path):
        return path
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir:
        candidate = os.path.join(data_dir, path)
        if os.path.exists(candidate):
            return candidate
    raise CliError(f"data file not found: {path!r} (also tried ${DATA_DIR_ENV})")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Effective settings with precedence flags > config file > defaults."""
    effective = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_values = json.load(f)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise CliError(f"config file sets unknown keys: {sorted(unknown)}")
        effective.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            effective[key] = value
    return effective


def _echo_config(cfg: dict) -> str:
    line = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    print(f"config: {line}")
    return line


def _write_csv(path: str, header_comment: str, columns: list[str], rows: list) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config: {header_comment}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# dataset construction

_DATA_DEFAULTS = {
    "data": "blobs",
    "images": None, "labels": None, "test_images": None, "test_labels": None,
    "limit": 0, "test_limit": 0,
    "blob_n": 100, "blob_test_n": 50, "blob_classes": 4, "blob_dim": 20,
    "blob_noise": 0.15,
}


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", choices=["blobs", "idx"], help="dataset source (default blobs)")
    p.add_argument("--images", help="IDX image file (training)")
    p.add_argument("--labels", help="IDX label file (training)")
    p.add_argument("--test-images", dest="test_images", help="IDX image file (test)")
    p.add_argument("--test-labels", dest="test_labels", help="IDX label file (test)")
    p.add_argument("--limit", type=int, help="cap on training examples (0 = all)")
    p.add_argument("--test-limit", dest="test_limit", type=int, help="cap on test examples")
    p.add_argument("--blob-n", dest="blob_n", type=int, help="training samples per class")
    p.add_argument("--blob-test-n", dest="blob_test_n", type=int, help="test samples per class")
    p.add_argument("--blob-classes", dest="blob_classes", type=int)
    p.add_argument("--blob-dim", dest="blob_dim", type=int)
    p.add_argument("--blob-noise", dest="blob_noise", type=float)


def _build_datasets(cfg: dict, master_seed: int) -> tuple[data_mod.Dataset, data_mod.Dataset]:
    if cfg["data"] == "idx":
        if not cfg["images"] or not cfg["labels"]:
            raise CliError("--data idx requires --images and --labels")
        train_set = data_mod.load_idx(_resolve_data_path(cfg["images"]),
                                      _resolve_data_path(cfg["labels"]))
        if cfg["test_images"] and cfg["test_labels"]:
            test_set = data_mod.load_idx(_resolve_data_path(cfg["test_images"]),
                                         _resolve_data_path(cfg["test_labels"]))
        else:
            raise CliError("--data idx requires --test-images and --test-labels")
        if cfg["limit"]:
            train_set = train_set.subset(slice(0, cfg["limit"]))
        if cfg["test_limit"]:
            test_set = test_set.subset(slice(0, cfg["test_limit"]))
        return train_set, test_set
    train_set = data_mod.synth_blobs(cfg["blob_n"], cfg["blob_classes"], cfg["blob_dim"],
                                     derive_seed(master_seed, "data/train"),
                                     cfg["blob_noise"])
    test_set = data_mod.synth_blobs(cfg["blob_test_n"], cfg["blob_classes"], cfg["blob_dim"],
                                    derive_seed(master_seed, "data/test"),
                                    cfg["blob_noise"])
    return train_set, test_set


# ---------------------------------------------------------------------------
# train / eval

_TRAIN_DEFAULTS = {
    "arch": None, "kind": "standard", "compression": 1.0, "expansion": 1.0,
    "epochs": 10, "lr": 0.1, "momentum": 0.0, "dropout": 0.0, "batch_size": 50,
    "activation": "relu", "seed": 0,
    "distill_from": None, "dk_temperature": 2.0, "dk_mix": 0.5,
    "out": None, "save_model": None,
    **_DATA_DEFAULTS,
}


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", help="comma-separated layer widths, e.g. 784,1000,10")
    p.add_argument("--kind", choices=METHODS, help="layer kind (default standard)")
    p.add_argument("--compression", type=_parse_value, help="compression factor c")
    p.add_argument("--expansion", type=_parse_value,
                   help="expansion factor (inflate hidden widths at fixed storage)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--dropout", type=float, help="hidden-activation dropout rate")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--activation", choices=["relu", "tanh", "sigmoid"])
    p.add_argument("--seed", type=int, help="master seed for all randomness")
    p.add_argument("--distill-from", dest="distill_from",
                   help="teacher checkpoint for soft-target training")
    p.add_argument("--dk-temperature", dest="dk_temperature", type=float)
    p.add_argument("--dk-mix", dest="dk_mix", type=float,
                   help="weight on hard labels (1 = ignore soft targets)")
    _add_data_flags(p)


def _plan_from_config(cfg: dict) -> budget.CompressionPlan:
    widths = _parse_widths(cfg["arch"]) if isinstance(cfg["arch"], str) else tuple(cfg["arch"])
    c, e = cfg["compression"], cfg["expansion"]
    if not c > 0:
        raise CliError(f"compression factor must be positive, got {c}")
    if e != 1.0 and c != 1.0:
        raise CliError("set either --compression or --expansion, not both")
    if cfg["kind"] == "standard" and (c != 1.0 or e != 1.0):
        raise CliError("--kind standard ignores budgets; use sweep for the "
                       "equivalent-size baseline or pick a compressed kind")
    if e != 1.0:
        return budget.plan_expansion(widths, e, cfg["kind"])
    return budget.plan_compression(widths, c, cfg["kind"])


def _train_config(cfg: dict, master_seed: int) -> TrainConfig:
    return TrainConfig(learning_rate=cfg["lr"], momentum=cfg["momentum"],
                       dropout_rate=cfg["dropout"], batch_size=cfg["batch_size"],
                       epochs=cfg["epochs"], rng_seed=derive_seed(master_seed, "train"),
                       dk_temperature=cfg["dk_temperature"], dk_mix=cfg["dk_mix"])


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _TRAIN_DEFAULTS)
    if not cfg["arch"]:
        raise CliError("--arch is required")
    master = cfg["seed"]
    cfg["derived_seeds"] = {"train": derive_seed(master, "train"),
                            "hash": derive_seed(master, "hash")}
    plan = _plan_from_config(cfg)
    header = _echo_config(cfg)
    train_set, test_set = _build_datasets(cfg, master)
    net = build_network(plan, master, hidden_activation=cfg["activation"])
    if cfg["distill_from"]:
        teacher = model_io.load_model(cfg["distill_from"])
        soft = distill_targets(teacher, train_set, cfg["dk_temperature"])
        train_set = train_set.with_soft_targets(soft)
    stats = train(net, train_set, _train_config(cfg, master), test_set)
    if cfg["out"]:
        rows = [[s.epoch, _fmt(s.train_loss), _fmt(s.train_err), _fmt(s.test_err)]
                for s in stats]
        _write_csv(cfg["out"], header, ["epoch", "train_loss", "train_err", "test_err"], rows)
    if cfg["save_model"]:
        model_io.save_model(net, cfg["save_model"])
    final_err = stats[-1].test_err if stats else evaluate(net, test_set)[1]
    print(f"param_count: {net.param_count}")
    print(f"final_test_error: {_fmt(final_err)}")
    return 0


_EVAL_DEFAULTS = {"model": None, "seed": 0, **_DATA_DEFAULTS}


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _EVAL_DEFAULTS)
    if not cfg["model"]:
        raise CliError("--model is required")
    _echo_config(cfg)
    net = model_io.load_model(cfg["model"])
    _, test_set = _build_datasets(cfg, cfg["seed"])
    loss, err = evaluate(net, test_set)
    print(json.dumps({"loss": loss, "test_error": err, "param_count": net.param_count},
                     sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# sweep

_SWEEP_DEFAULTS = {
    "arch": None, "axis": "compression", "values": None, "methods": "hashed,standard",
    "seeds": 3, "epochs": 10, "lr": 0.1, "momentum": 0.0, "dropout": 0.0,
    "batch_size": 50, "activation": "relu", "seed": 0, "out": None,
    "dk_temperature": 2.0, "dk_mix": 0.5, "distill_from": None,
    **_DATA_DEFAULTS,
}


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _SWEEP_DEFAULTS)
    if not cfg["arch"]:
        raise CliError("--arch is required")
    if not cfg["values"]:
        raise CliError("--values is required (comma-separated factors, fractions allowed)")
    if not cfg["out"]:
        raise CliError("--out is required")
    widths = _parse_widths(cfg["arch"])
    values = [_parse_value(v) for v in str(cfg["values"]).split(",")]
    if not values or any(v <= 0 for v in values):
        raise CliError("sweep values must be positive")
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise CliError(f"unknown methods {unknown}; choose from {list(METHODS)}")
    if cfg["axis"] not in ("compression", "expansion"):
        raise CliError("--axis must be compression or expansion")
    master = cfg["seed"]
    header = _echo_config(cfg)
    train_set, test_set = _build_datasets(cfg, master)

    rows = []
    for value in values:
        for method in methods:
            try:
                if cfg["axis"] == "compression":
                    plan = budget.plan_compression(widths, value, method)
                else:
                    plan = budget.plan_expansion(widths, value, method)
            except (budget.InfeasibleBudgetError, budget.DegenerateArchitectureError) as exc:
                print(f"infeasible: {cfg['axis']}={value} method={method}: {exc}",
                      file=sys.stderr)
                for seed_index in range(cfg["seeds"]):
                    rows.append([_fmt(value), method, seed_index, "nan", 0])
                continue
            for seed_index in range(cfg["seeds"]):
                run_seed = derive_seed(master, f"{cfg['axis']}/{value!r}/{method}/{seed_index}")
                net = build_network(plan, run_seed, hidden_activation=cfg["activation"])
                run_train = train_set
                if cfg["distill_from"]:
                    teacher = model_io.load_model(cfg["distill_from"])
                    soft = distill_targets(teacher, train_set, cfg["dk_temperature"])
                    run_train = train_set.with_soft_targets(soft)
                tconf = TrainConfig(
                    learning_rate=cfg["lr"], momentum=cfg["momentum"],
                    dropout_rate=cfg["dropout"], batch_size=cfg["batch_size"],
                    epochs=cfg["epochs"], rng_seed=derive_seed(run_seed, "train"),
                    dk_temperature=cfg["dk_temperature"], dk_mix=cfg["dk_mix"])
                stats = train(net, run_train, tconf, test_set)
                err = stats[-1].test_err if stats else evaluate(net, test_set)[1]
                rows.append([_fmt(value), method, seed_index, _fmt(err), net.param_count])
                print(f"{cfg['axis']}={value} method={method} seed={seed_index} "
                      f"test_error={_fmt(err)} params={net.param_count}")
    _write_csv(cfg["out"], header,
               ["axis_value", "method", "seed", "test_error", "param_count"], rows)
    return 0


# ---------------------------------------------------------------------------
# gradcheck / shrink / equivtest

_GRADCHECK_DEFAULTS = {
    "arch": None, "kind": "hashed", "buckets": 0, "compression": 0.5,
    "samples": 5, "classes": 0, "seed": 0, "epsilon": 1e-5, "tol": 1e-6,
}


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _GRADCHECK_DEFAULTS)
    if not cfg["arch"]:
        raise CliError("--arch is required")
    widths = _parse_widths(cfg["arch"])
    if cfg["kind"] == "hashed" and cfg["buckets"]:
        plan = budget.CompressionPlan("hashed", widths,
                                      bucket_counts=tuple([cfg["buckets"]] * (len(widths) - 1)))
    elif cfg["kind"] == "standard":
        plan = budget.plan_compression(widths, 1.0, "standard")
    else:
        plan = budget.plan_compression(widths, cfg["compression"], cfg["kind"])
    _echo_config(cfg)
    net = build_network(plan, cfg["seed"], hidden_activation="tanh",
                        precompute_hash=False)
    rng = np.random.default_rng(derive_seed(cfg["seed"], "gradcheck"))
    worst = 0.0
    for _ in range(cfg["samples"]):
        x = rng.random(widths[0])
        y = int(rng.integers(widths[-1]))
        worst = max(worst, grad_check(net, x, y, epsilon=cfg["epsilon"]))
    print(json.dumps({"max_rel_err": worst, "tol": cfg["tol"]}, sort_keys=True))
    return 0 if worst < cfg["tol"] else 1


_SHRINK_DEFAULTS = {"arch": None, "c": None}


def cmd_shrink(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _SHRINK_DEFAULTS)
    if not cfg["arch"] or cfg["c"] is None:
        raise CliError("--arch and --c are required")
    widths = _parse_widths(cfg["arch"])
    c = cfg["c"] if isinstance(cfg["c"], float) else _parse_value(str(cfg["c"]))
    arch = budget.Architecture(widths, c)
    r = budget.solve_shrinkage(arch, c)
    out = {"r": r,
           "n_hash": budget.param_count_hashed(arch, c),
           "n_standard": budget.param_count_standard(arch, r),
           "hidden_widths": budget.hidden_widths(arch, r)}
    print(json.dumps(out, sort_keys=True))
    return 0


_EQUIV_DEFAULTS = {"layers": 50, "max_width": 32, "max_buckets": 64,
                   "seed": 0, "tol": 1e-12}


def cmd_equivtest(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, _EQUIV_DEFAULTS)
    _echo_config(cfg)
    worst = run_equivalence_suite(n_layers=cfg["layers"], max_width=cfg["max_width"],
                                  max_buckets=cfg["max_buckets"], seed=cfg["seed"])
    ok = all(v <= cfg["tol"] for v in worst.values())
    print(json.dumps({"max_abs_deviation": worst, "tol": cfg["tol"],
                      "pass": ok}, sort_keys=True))
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hashnn",
        description="Train and compare compressed neural networks at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one network and log per-epoch metrics")
    _add_train_flags(p)
    p.add_argument("--out", help="CSV log path")
    p.add_argument("--save-model", dest="save_model", help="checkpoint path")
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", help="checkpoint path")
    p.add_argument("--seed", type=int)
    _add_data_flags(p)
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train a grid of (value, method) points")
    p.add_argument("--arch")
    p.add_argument("--axis", choices=["compression", "expansion"])
    p.add_argument("--values", help="comma-separated factors; fractions like 1/8 allowed")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--seeds", type=int, help="number of repetitions per point")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--activation", choices=["relu", "tanh", "sigmoid"])
    p.add_argument("--seed", type=int)
    p.add_argument("--distill-from", dest="distill_from")
    p.add_argument("--dk-temperature", dest="dk_temperature", type=float)
    p.add_argument("--dk-mix", dest="dk_mix", type=float)
    p.add_argument("--out", help="sweep CSV path")
    _add_data_flags(p)
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="compare analytic and numeric gradients")
    p.add_argument("--arch")
    p.add_argument("--kind", choices=METHODS)
    p.add_argument("--K", dest="buckets", type=int, help="bucket count per hashed layer")
    p.add_argument("--compression", type=_parse_value)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("shrink", help="solve the equivalent-size shrinkage factor")
    p.add_argument("--arch")
    p.add_argument("--c", type=_parse_value, help="compression factor")
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_shrink)

    p = sub.add_parser("equivtest", help="run the feature-hashing equivalence suite")
    p.add_argument("--layers", type=int)
    p.add_argument("--max-width", dest="max_width", type=int)
    p.add_argument("--max-buckets", dest="max_buckets", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.set_defaults(func=cmd_equivtest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, budget.InfeasibleBudgetError,
            budget.DegenerateArchitectureError, DivergenceError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
