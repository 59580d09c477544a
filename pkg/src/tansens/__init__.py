"""Tangent sensitivity analysis for fully-connected ReLU networks.

Computes the matrix of mixed second derivatives d²f/dθ dx (how the parameter
gradient moves under input perturbations), its closed-form upper bounds, and
label-free test-loss estimators built on them, together with a from-scratch
trainer and dataset loaders to reproduce the reference experiment at desk
scale.
"""

from .bounds import (
    hoeffding_tail,
    max_region_count,
    moment_bound,
    norm_bound,
    psi_star,
)
from .data_io import Dataset, load_cifar10, load_mnist, subsample, synthetic_gaussian
from .estimators import (
    accuracy_estimate,
    active_stats_loss_estimate,
    empirical_loss_estimate,
    log_norm_loss_estimate,
    mean_absolute_error,
    norm_loss_estimate,
)
from .network import (
    ForwardTrace,
    NetworkSpec,
    Params,
    activation_pattern,
    forward,
    forward_jacobian,
    load_params,
    save_params,
)
from .region_stats import (
    ActiveNodeStats,
    active_node_stats,
    empirical_tangent_sensitivity,
    neuron_margins,
    pattern_log_probability,
    region_constancy_check,
)
from .sensitivity import (
    finite_difference_sensitivity,
    frobenius_sq,
    mean_frobenius_sq,
    path_enumeration_sensitivity,
    tangent_sensitivity,
    tangent_sensitivity_per_output,
)
from .specfun import ConvergenceError, gamma_fn, kummer_1f1, normal_abs_moment
from .trainer import TrainConfig, cross_entropy, init_params, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "ActiveNodeStats",
    "ConvergenceError",
    "Dataset",
    "ForwardTrace",
    "NetworkSpec",
    "Params",
    "TrainConfig",
    "accuracy_estimate",
    "activation_pattern",
    "active_node_stats",
    "active_stats_loss_estimate",
    "cross_entropy",
    "empirical_loss_estimate",
    "empirical_tangent_sensitivity",
    "finite_difference_sensitivity",
    "forward",
    "forward_jacobian",
    "frobenius_sq",
    "gamma_fn",
    "hoeffding_tail",
    "init_params",
    "kummer_1f1",
    "load_cifar10",
    "load_mnist",
    "load_params",
    "log_norm_loss_estimate",
    "max_region_count",
    "mean_absolute_error",
    "mean_frobenius_sq",
    "moment_bound",
    "neuron_margins",
    "norm_bound",
    "norm_loss_estimate",
    "normal_abs_moment",
    "path_enumeration_sensitivity",
    "pattern_log_probability",
    "psi_star",
    "region_constancy_check",
    "save_params",
    "sgd_step",
    "subsample",
    "synthetic_gaussian",
    "tangent_sensitivity",
    "tangent_sensitivity_per_output",
    "train",
]
