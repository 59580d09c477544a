"""Label-free estimators of test loss from sensitivity measures.

Each estimator multiplies the current training loss by a ratio of sensitivity
quantities and never touches test labels (they accept unlabeled test inputs
at most):

* norm ratio -- squared products of per-layer max weights at consecutive
  training steps (the input-independent bound's only moving part);
* log-norm ratio -- same, but the ratio of logarithms of the full bound,
  which tames the exponential swing of the norm product;
* active-stats ratio -- distribution shift of active-neuron counts between
  train and test, through the psi* factor of the moment bound;
* empirical ratio -- membership-weighted region sensitivities of the two
  input sets.

Test accuracy is estimated by dividing train accuracy by the same ratio
(sensitivity up => loss up => accuracy down); ``direct=True`` multiplies
instead.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, fields

import numpy as np

from .bounds import layer_max_abs, log_psi_star, norm_bound
from .network import Params
from .region_stats import empirical_tangent_sensitivity

EstimatorValue = namedtuple("EstimatorValue", ["loss", "ratio"])


def _same_spec(prev_params: Params, params: Params):
    if prev_params.spec != params.spec:
        raise ValueError("parameter states come from different network specs")


def norm_loss_estimate(prev_params: Params, params: Params, train_loss: float) -> EstimatorValue:
    """Ratio of squared per-layer max-weight products between two states."""
    _same_spec(prev_params, params)
    prev = layer_max_abs(prev_params)
    cur = layer_max_abs(params)
    if np.any(prev == 0.0) or np.any(cur == 0.0):
        raise ValueError("norm ratio undefined: a layer has no nonzero weight")
    ratio = math.exp(2.0 * float(np.sum(np.log(prev)) - np.sum(np.log(cur))))
    return EstimatorValue(ratio * train_loss, ratio)


def log_norm_loss_estimate(
    prev_params: Params, params: Params, train_loss: float
) -> EstimatorValue:
    """Ratio of logarithms of the full tight norm bound (constants included)."""
    _same_spec(prev_params, params)
    log_prev = norm_bound(prev_params).log_tight
    log_cur = norm_bound(params).log_tight
    if log_prev is None or log_cur is None:
        raise ValueError("log-norm ratio undefined: a layer has no nonzero weight")
    if log_prev <= 0.0 or log_cur <= 0.0:
        raise ValueError("log-norm ratio requires bound values > 1")
    ratio = log_prev / log_cur
    return EstimatorValue(ratio * train_loss, ratio)


def active_stats_loss_estimate(
    params: Params, train_stats, test_stats, train_loss: float
) -> EstimatorValue:
    """psi*(k, test stats) / psi*(k, train stats) times the training loss."""
    k = params.spec.depth
    ratio = math.exp(
        log_psi_star(k, float(test_stats.mu), float(test_stats.sigma))
        - log_psi_star(k, float(train_stats.mu), float(train_stats.sigma))
    )
    return EstimatorValue(ratio * train_loss, ratio)


def empirical_loss_estimate(params: Params, X_train, X_test, train_loss: float) -> EstimatorValue:
    """Empirical tangent sensitivity of test inputs over that of train inputs."""
    s_tr = empirical_tangent_sensitivity(params, X_train)
    if s_tr <= 0.0:
        raise ValueError("empirical sensitivity of the training set is zero")
    s_te = empirical_tangent_sensitivity(params, X_test)
    ratio = s_te / s_tr
    return EstimatorValue(ratio * train_loss, ratio)


def accuracy_estimate(ratio: float, train_acc: float, direct: bool = False) -> float:
    """Map a sensitivity ratio and train accuracy to a test-accuracy estimate."""
    if ratio <= 0.0:
        raise ValueError("ratio must be positive")
    if not 0.0 <= train_acc <= 1.0:
        raise ValueError("train accuracy must lie in [0, 1]")
    est = train_acc * ratio if direct else train_acc / ratio
    return min(1.0, max(0.0, est))


def mean_absolute_error(estimates, truths) -> float:
    estimates = np.asarray(estimates, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if estimates.shape != truths.shape or estimates.size == 0:
        raise ValueError("series must be nonempty and of equal length")
    return float(np.mean(np.abs(estimates - truths)))


CSV_COLUMNS = (
    "epoch",
    "train_loss",
    "test_loss",
    "train_acc",
    "test_acc",
    "est_l1",
    "est_l1_log",
    "est_l2",
    "est_l3",
    "est_acc_l1",
    "est_acc_l2",
    "est_acc_l3",
)


@dataclass(frozen=True)
class EstimatorReport:
    """One metrics row; field order matches the CSV schema."""

    epoch: int
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float
    est_l1: float
    est_l1_log: float
    est_l2: float
    est_l3: float
    est_acc_l1: float
    est_acc_l2: float
    est_acc_l3: float

    def to_row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]


assert tuple(f.name for f in fields(EstimatorReport)) == CSV_COLUMNS


def write_metrics_csv(reports, path) -> None:
    """Stream estimator reports into the fixed-schema metrics CSV."""
    with open(path, "w") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for report in reports:
            f.write(",".join(repr(v) for v in report.to_row()) + "\n")


def epoch_report(
    prev_params: Params,
    params: Params,
    X_train,
    X_test,
    train_loss: float,
    train_acc: float,
    test_loss: float,
    test_acc: float,
    epoch: int,
    train_stats=None,
    test_stats=None,
) -> EstimatorReport:
    """Evaluate all estimators for one epoch transition.

    ``test_loss``/``test_acc`` are carried through as ground truth for later
    scoring only; the estimators see unlabeled test inputs.
    """
    from .region_stats import active_node_stats

    if train_stats is None:
        train_stats = active_node_stats(params, X_train)
    if test_stats is None:
        test_stats = active_node_stats(params, X_test)
    l1 = norm_loss_estimate(prev_params, params, train_loss)
    l1_log = log_norm_loss_estimate(prev_params, params, train_loss)
    l2 = active_stats_loss_estimate(params, train_stats, test_stats, train_loss)
    l3 = empirical_loss_estimate(params, X_train, X_test, train_loss)
    return EstimatorReport(
        epoch=epoch,
        train_loss=train_loss,
        test_loss=test_loss,
        train_acc=train_acc,
        test_acc=test_acc,
        est_l1=l1.loss,
        est_l1_log=l1_log.loss,
        est_l2=l2.loss,
        est_l3=l3.loss,
        est_acc_l1=accuracy_estimate(l1.ratio, train_acc),
        est_acc_l2=accuracy_estimate(l2.ratio, train_acc),
        est_acc_l3=accuracy_estimate(l3.ratio, train_acc),
    )
