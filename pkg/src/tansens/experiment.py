"""End-to-end experiment pipeline: train, estimate per epoch, score, export.

The desk-scale preset mirrors the full protocol at laptop cost: a 4x100
ReLU MLP trained with SGD (lr 0.05, weight decay 5e-4, batch 64) on a
10k/2k train/test pair of 3072-dimensional 10-class inputs, with every
estimator evaluated after each epoch and scored by mean absolute error
against the measured test loss.  Real CIFAR-10 batches are used when a data
directory provides them; otherwise a synthetic class-Gaussian stand-in of
the same shape keeps the pipeline self-contained.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import bounds, estimators, region_stats, trainer
from .data_io import Dataset, load_cifar10, subsample, synthetic_gaussian
from .network import NetworkSpec, save_params

DESK_TRAIN_SIZE = 10_000
DESK_TEST_SIZE = 2_000
DESK_EPOCHS = 20
DESK_HIDDEN = (100, 100, 100, 100)
# Synthetic stand-in difficulty: class-mean scale against unit noise, tuned
# so the desk net neither memorizes instantly nor stalls.
SYNTH_MEAN_SCALE = 0.06
SYNTH_MEANS_SEED = 20_240_607


def desk_datasets(data_dir=None, train_size=DESK_TRAIN_SIZE, test_size=DESK_TEST_SIZE, seed=0):
    """CIFAR-10 subsamples when available, else the synthetic stand-in."""
    data_dir = data_dir or os.environ.get("TANSENS_DATA_DIR")
    if data_dir and os.path.exists(os.path.join(data_dir, "data_batch_1.bin")):
        train, test = load_cifar10(data_dir)
        return subsample(train, train_size, seed), subsample(test, test_size, seed + 1)
    train = synthetic_gaussian(
        3072, 10, train_size, seed=seed + 1, means_seed=SYNTH_MEANS_SEED,
        mean_scale=SYNTH_MEAN_SCALE,
    )
    test = synthetic_gaussian(
        3072, 10, test_size, seed=seed + 2, means_seed=SYNTH_MEANS_SEED,
        mean_scale=SYNTH_MEAN_SCALE,
    )
    return train, test


@dataclass
class ExperimentResult:
    spec: NetworkSpec
    config: trainer.TrainConfig
    train_result: trainer.TrainResult
    reports: list  # EstimatorReport per epoch
    mae_summary: dict
    bound_rows: list  # per-epoch bound report dicts
    artifacts: dict  # name -> path (empty when not written to disk)
    elapsed_seconds: float


def mae_summary(reports) -> dict:
    """MAE of each estimator against measured test loss/accuracy.

    Includes the naive baseline that predicts test = train.
    """
    test_loss = [r.test_loss for r in reports]
    test_acc = [r.test_acc for r in reports]
    train_loss = [r.train_loss for r in reports]
    train_acc = [r.train_acc for r in reports]
    mae = estimators.mean_absolute_error
    return {
        "loss": {
            "baseline_train_loss": mae(train_loss, test_loss),
            "norm_ratio": mae([r.est_l1 for r in reports], test_loss),
            "log_norm_ratio": mae([r.est_l1_log for r in reports], test_loss),
            "active_stats_ratio": mae([r.est_l2 for r in reports], test_loss),
            "empirical_ratio": mae([r.est_l3 for r in reports], test_loss),
        },
        "accuracy": {
            "baseline_train_acc": mae(train_acc, test_acc),
            "norm_ratio": mae([r.est_acc_l1 for r in reports], test_acc),
            "active_stats_ratio": mae([r.est_acc_l2 for r in reports], test_acc),
            "empirical_ratio": mae([r.est_acc_l3 for r in reports], test_acc),
        },
    }


def run_experiment(
    spec: NetworkSpec,
    cfg: trainer.TrainConfig,
    train_ds: Dataset,
    test_ds: Dataset,
    out_dir=None,
    with_bounds: bool = True,
    with_estimators: bool = True,
    verbose: bool = False,
) -> ExperimentResult:
    """Train and run the per-epoch estimator/bound analysis pass.

    With ``out_dir`` set, writes per-epoch checkpoints, the metrics CSV,
    per-epoch bound reports (JSON lines), final-epoch active-neuron
    histograms, the MAE summary and a manifest.
    """
    t0 = time.time()
    artifacts = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    result = trainer.train(spec, train_ds.as_tuple(), test_ds.as_tuple(), cfg)
    if out_dir:
        for epoch, params in enumerate(result.checkpoints):
            path = os.path.join(out_dir, f"epoch_{epoch:03d}.ckpt")
            save_params(params, path)
        artifacts["checkpoints"] = os.path.join(out_dir, "epoch_*.ckpt")

    X_tr, X_te = train_ds.inputs, test_ds.inputs
    reports = []
    bound_rows = []
    for epoch in range(1, cfg.epochs + 1):
        prev_params = result.checkpoints[epoch - 1]
        params = result.checkpoints[epoch]
        row = result.metrics[epoch - 1]
        stats_tr = region_stats.active_node_stats(params, X_tr)
        stats_te = region_stats.active_node_stats(params, X_te)
        if with_estimators:
            report = estimators.epoch_report(
                prev_params,
                params,
                X_tr,
                X_te,
                train_loss=row["train_loss"],
                train_acc=row["train_acc"],
                test_loss=row["test_loss"],
                test_acc=row["test_acc"],
                epoch=epoch,
                train_stats=stats_tr,
                test_stats=stats_te,
            )
            reports.append(report)
        if with_bounds:
            bound_rows.append({"epoch": epoch, **bounds.bound_report(params, stats_tr)})
        if verbose:
            print(
                f"epoch {epoch:3d}  train_loss {row['train_loss']:.4f}  "
                f"test_loss {row['test_loss']:.4f}  train_acc {row['train_acc']:.3f}  "
                f"test_acc {row['test_acc']:.3f}"
            )

    summary = mae_summary(reports) if reports else {}
    if out_dir:
        metrics_path = os.path.join(out_dir, "metrics.csv")
        estimators.write_metrics_csv(reports, metrics_path)
        artifacts["metrics"] = metrics_path
        if with_bounds:
            bounds_path = os.path.join(out_dir, "bounds.jsonl")
            with open(bounds_path, "w") as f:
                for row in bound_rows:
                    f.write(json.dumps(row) + "\n")
            artifacts["bounds"] = bounds_path
        hist_path = os.path.join(out_dir, "active_histograms.csv")
        region_stats.export_active_histograms(result.checkpoints[-1], X_tr, X_te, hist_path)
        artifacts["active_histograms"] = hist_path
        if summary:
            mae_path = os.path.join(out_dir, "mae_summary.json")
            with open(mae_path, "w") as f:
                json.dump(summary, f, indent=2)
                f.write("\n")
            artifacts["mae_summary"] = mae_path
        manifest = {
            "network": list(spec.layer_sizes),
            "use_bias": spec.use_bias,
            "epochs": cfg.epochs,
            "train_samples": len(train_ds),
            "test_samples": len(test_ds),
            "dataset": train_ds.name,
            "artifacts": artifacts,
        }
        with open(os.path.join(out_dir, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
        artifacts["manifest"] = os.path.join(out_dir, "manifest.json")
    return ExperimentResult(
        spec=spec,
        config=cfg,
        train_result=result,
        reports=reports,
        mae_summary=summary,
        bound_rows=bound_rows,
        artifacts=artifacts,
        elapsed_seconds=time.time() - t0,
    )


def run_desk_scale(
    out_dir=None,
    data_dir=None,
    epochs: int = DESK_EPOCHS,
    train_size: int = DESK_TRAIN_SIZE,
    test_size: int = DESK_TEST_SIZE,
    seed: int = 0,
    verbose: bool = False,
) -> ExperimentResult:
    """The desk-scale reproduction run with its pinned protocol."""
    train_ds, test_ds = desk_datasets(data_dir, train_size, test_size, seed)
    spec = NetworkSpec((train_ds.d_in, *DESK_HIDDEN, 10), use_bias=True)
    cfg = trainer.TrainConfig(
        epochs=epochs,
        batch_size=64,
        learning_rate=0.05,
        weight_decay=0.0005,
        seed=seed,
    )
    return run_experiment(
        spec, cfg, train_ds, test_ds, out_dir=out_dir, verbose=verbose
    )


def format_mae_table(summary: dict) -> str:
    """Plain-text MAE table in the style of the reproduction target."""
    lines = ["estimator                    loss MAE      accuracy MAE"]
    acc = summary.get("accuracy", {})
    for key, label in (
        ("baseline_train_loss", "baseline (train as estimate)"),
        ("norm_ratio", "norm ratio"),
        ("log_norm_ratio", "log-norm ratio"),
        ("active_stats_ratio", "active-stats ratio"),
        ("empirical_ratio", "empirical ratio"),
    ):
        loss_mae = summary["loss"].get(key)
        acc_key = "baseline_train_acc" if key == "baseline_train_loss" else key
        acc_mae = acc.get(acc_key)
        loss_str = f"{loss_mae:.6f}" if loss_mae is not None else "-"
        acc_str = f"{acc_mae:.6f}" if acc_mae is not None else "-"
        lines.append(f"{label:<28} {loss_str:>12} {acc_str:>15}")
    return "\n".join(lines)
