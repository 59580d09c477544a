"""Command-line interface.

Subcommands:

* ``train``            -- config-driven training + per-epoch analysis
* ``analyze``          -- bounds/statistics/oracle checks for a checkpoint
* ``sweep``            -- moment-bound sweeps as plot-ready CSV
* ``reproduce-cifar``  -- the desk-scale reproduction protocol
* ``reproduce-fig2``   -- all preset sweep panels

Dataset files are looked up under ``--data-dir`` or ``$TANSENS_DATA_DIR``.
Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bounds, experiment, region_stats, sensitivity, sweeps, trainer
from .data_io import load_cifar10, load_mnist, official_urls, subsample, synthetic_gaussian
from .network import NetworkSpec, load_params

DEFAULT_CONFIG = {
    "network.layers": "3072,100,100,100,100,10",
    "network.bias": "true",
    "train.epochs": "20",
    "train.batch_size": "64",
    "train.lr": "0.05",
    "train.weight_decay": "0.0005",
    "train.seed": "0",
    "train.shuffle": "true",
    "train.optimizer": "sgd",
    "data.kind": "synthetic",
    "data.dir": "",
    "data.train_size": "10000",
    "data.test_size": "2000",
    "data.seed": "0",
    "data.d_in": "3072",
    "data.classes": "10",
    "output.dir": "runs/latest",
}


class ConfigError(ValueError):
    pass


def parse_config_file(path) -> dict:
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def _as_bool(text, key):
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def build_run(config: dict):
    """Validate a merged config into (spec, train config, datasets, out_dir)."""
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config)
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        layers = tuple(int(s) for s in cfg["network.layers"].split(","))
    except ValueError as exc:
        raise ConfigError(f"network.layers: {exc}") from exc
    spec = NetworkSpec(layers, use_bias=_as_bool(cfg["network.bias"], "network.bias"))
    try:
        tc = trainer.TrainConfig(
            epochs=int(cfg["train.epochs"]),
            batch_size=int(cfg["train.batch_size"]),
            learning_rate=float(cfg["train.lr"]),
            weight_decay=float(cfg["train.weight_decay"]),
            seed=int(cfg["train.seed"]),
            shuffle=_as_bool(cfg["train.shuffle"], "train.shuffle"),
            optimizer=cfg["train.optimizer"],
        )
    except ValueError as exc:
        raise ConfigError(f"train.*: {exc}") from exc
    train_ds, test_ds = load_datasets(
        kind=cfg["data.kind"],
        data_dir=cfg["data.dir"] or None,
        train_size=int(cfg["data.train_size"]),
        test_size=int(cfg["data.test_size"]),
        seed=int(cfg["data.seed"]),
        d_in=int(cfg["data.d_in"]),
        classes=int(cfg["data.classes"]),
    )
    if train_ds.d_in != spec.d_in:
        raise ConfigError(
            f"network.layers starts at {spec.d_in} but data has d_in={train_ds.d_in}"
        )
    return spec, tc, train_ds, test_ds, cfg["output.dir"]


def load_datasets(kind, data_dir, train_size, test_size, seed, d_in=3072, classes=10):
    data_dir = data_dir or os.environ.get("TANSENS_DATA_DIR")
    if kind == "synthetic":
        train = synthetic_gaussian(
            d_in, classes, train_size, seed=seed + 1,
            means_seed=experiment.SYNTH_MEANS_SEED, mean_scale=experiment.SYNTH_MEAN_SCALE,
        )
        test = synthetic_gaussian(
            d_in, classes, test_size, seed=seed + 2,
            means_seed=experiment.SYNTH_MEANS_SEED, mean_scale=experiment.SYNTH_MEAN_SCALE,
        )
        return train, test
    if not data_dir:
        raise ConfigError(
            f"data.kind={kind} needs data.dir or $TANSENS_DATA_DIR; "
            f"download from {official_urls()[kind]}"
        )
    if kind == "cifar10":
        train, test = load_cifar10(data_dir)
    elif kind == "mnist":
        train, test = load_mnist(data_dir)
    else:
        raise ConfigError(f"unknown data.kind {kind!r}")
    if train_size < len(train):
        train = subsample(train, train_size, seed)
    if test_size < len(test):
        test = subsample(test, test_size, seed + 1)
    return train, test


def cmd_train(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        config[key.strip()] = val.strip()
    if args.epochs is not None:
        config["train.epochs"] = str(args.epochs)
    if args.seed is not None:
        config["train.seed"] = str(args.seed)
    if args.data is not None:
        config["data.kind"] = args.data
    if args.data_dir is not None:
        config["data.dir"] = args.data_dir
    if args.out is not None:
        config["output.dir"] = args.out
    spec, tc, train_ds, test_ds, out_dir = build_run(config)
    result = experiment.run_experiment(
        spec, tc, train_ds, test_ds, out_dir=out_dir, verbose=not args.quiet
    )
    if result.mae_summary:
        print(experiment.format_mae_table(result.mae_summary))
    print(f"artifacts in {out_dir} ({result.elapsed_seconds:.1f}s)")
    return 0


def cmd_analyze(args) -> int:
    params = load_params(args.checkpoint)
    spec = params.spec
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    train_ds, test_ds = load_datasets(
        kind=args.data,
        data_dir=args.data_dir,
        train_size=args.n,
        test_size=max(args.n // 5, 1),
        seed=args.seed,
        d_in=spec.d_in,
    )
    if train_ds.d_in != spec.d_in:
        raise ConfigError(f"checkpoint expects d_in={spec.d_in}, data has {train_ds.d_in}")
    X = train_ds.inputs
    artifacts = {}

    if args.bounds:
        stats = region_stats.active_node_stats(params, X)
        path = os.path.join(out_dir, "bounds.json")
        bounds.write_bound_report(params, stats, path)
        artifacts["bounds"] = path
    if args.stats:
        path = os.path.join(out_dir, "active_histograms.csv")
        region_stats.export_active_histograms(params, X, test_ds.inputs, path)
        stats = region_stats.active_node_stats(params, X)
        fstats = sensitivity.mean_frobenius_sq(params, X)
        summary = {
            "active_mean": stats.mu,
            "active_std": stats.sigma,
            "frobenius_sq_mean": fstats.mean,
            "frobenius_sq_max": fstats.max,
            "hoeffding_tail_eps1": bounds.hoeffding_tail(1.0, len(X), fstats.max),
        }
        spath = os.path.join(out_dir, "stats.json")
        with open(spath, "w") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
        artifacts["active_histograms"] = path
        artifacts["stats"] = spath
    if args.margins:
        path = os.path.join(out_dir, "margins.csv")
        region_stats.export_margins_csv(params, X, path)
        artifacts["margins"] = path
    if args.constancy:
        report = region_stats.region_constancy_check(
            params, X[0], trials=args.constancy_trials, radius=args.constancy_radius,
            seed=args.seed,
        )
        path = os.path.join(out_dir, "constancy.json")
        with open(path, "w") as f:
            json.dump(report.__dict__, f, indent=2)
            f.write("\n")
        artifacts["constancy"] = path
        print(
            f"constancy: {report.in_region}/{report.trials} in-region, "
            f"max |diff| = {report.max_abs_diff:.3e}"
        )
    if args.oracle_check:
        n_paths = sensitivity.path_count(spec)
        if n_paths > args.path_cap:
            raise ConfigError(
                f"oracle check refused: {n_paths} paths exceed the cap of {args.path_cap}"
            )
        x = X[0]
        exact = sensitivity.tangent_sensitivity(params, x)
        oracle = sensitivity.path_enumeration_sensitivity(params, x, cap=args.path_cap)
        diff = float(np.max(np.abs(exact - oracle)))
        print(f"oracle check: {n_paths} paths, max |layerwise - enumeration| = {diff:.3e}")
        artifacts["oracle_check"] = f"max_abs_diff={diff!r}"
    if args.sensitivity_csv:
        x = X[0]
        S = sensitivity.tangent_sensitivity(params, x)
        path = os.path.join(out_dir, "sensitivity.csv")
        sensitivity.export_sensitivity_csv(S, spec, path)
        artifacts["sensitivity"] = path
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump({"checkpoint": args.checkpoint, "artifacts": artifacts}, f, indent=2)
        f.write("\n")
    return 0


def cmd_sweep(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.preset:
        paths = sweeps.preset_sweeps(args.out)
        for param, path in paths.items():
            print(f"{param}: {path}")
        return 0
    if not args.param:
        raise ConfigError("either --preset or --param is required")
    if args.num < 1:
        raise ConfigError("--num must be >= 1")
    if args.log:
        if args.start <= 0 or args.stop <= 0:
            raise ConfigError("--log sweeps need positive endpoints")
        values = np.geomspace(args.start, args.stop, args.num)
    else:
        values = np.linspace(args.start, args.stop, args.num)
    base = {}
    for item in args.fix or []:
        key, val = item.split("=", 1)
        if key not in sweeps.PRESET_BASE:
            raise ConfigError(f"--fix {key}: unknown parameter")
        base[key] = float(val)
    rows = sweeps.sweep_moment_bound(args.param, values, base=base)
    path = os.path.join(args.out, f"sweep_{args.param}.csv")
    sweeps.write_sweep_csv(rows, path)
    print(path)
    return 0


def cmd_reproduce_cifar(args) -> int:
    result = experiment.run_desk_scale(
        out_dir=args.out,
        data_dir=args.data_dir,
        epochs=args.epochs,
        train_size=args.train_size,
        test_size=args.test_size,
        seed=args.seed,
        verbose=not args.quiet,
    )
    print(experiment.format_mae_table(result.mae_summary))
    print(f"artifacts in {args.out} ({result.elapsed_seconds:.1f}s)")
    return 0


def cmd_reproduce_fig2(args) -> int:
    paths = sweeps.preset_sweeps(args.out)
    for param, path in paths.items():
        print(f"{param}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tansens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and analyze each epoch")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data", choices=["synthetic", "cifar10", "mnist"])
    p.add_argument("--data-dir")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="analyze a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", default="synthetic", choices=["synthetic", "cifar10", "mnist"])
    p.add_argument("--data-dir")
    p.add_argument("--n", type=int, default=500, help="samples to analyze")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bounds", action="store_true")
    p.add_argument("--stats", action="store_true")
    p.add_argument("--margins", action="store_true")
    p.add_argument("--constancy", action="store_true")
    p.add_argument("--constancy-trials", type=int, default=200)
    p.add_argument("--constancy-radius", type=float, default=1e-3)
    p.add_argument("--oracle-check", action="store_true")
    p.add_argument("--path-cap", type=int, default=10**5)
    p.add_argument("--sensitivity-csv", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="moment-bound sweeps as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", action="store_true", help="emit all preset panels")
    p.add_argument("--param", choices=list(sweeps.SWEEPABLE))
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int, default=16)
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.add_argument("--fix", action="append", metavar="KEY=VALUE", help="pin a base parameter")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce-cifar", help="desk-scale reproduction protocol")
    p.add_argument("--out", default="runs/reproduce-cifar")
    p.add_argument("--data-dir")
    p.add_argument("--epochs", type=int, default=experiment.DESK_EPOCHS)
    p.add_argument("--train-size", type=int, default=experiment.DESK_TRAIN_SIZE)
    p.add_argument("--test-size", type=int, default=experiment.DESK_TEST_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_reproduce_cifar)

    p = sub.add_parser("reproduce-fig2", help="all preset sweep panels")
    p.add_argument("--out", default="runs/reproduce-fig2")
    p.set_defaults(func=cmd_reproduce_fig2)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IOError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
