"""Closed-form upper bounds on tangent sensitivity and related diagnostics.

Two bounds are provided.  The norm bound depends only on the weights: it is a
degree-``2(k-1)`` homogeneous function built from the per-layer max-abs
weights and the widest layer.  The moment bound additionally assumes the
per-input count of active hidden neurons is normally distributed and weighs
the maximal path count by an absolute moment of that distribution, which
brings in Gamma and Kummer-1F1 factors.  Both are computed in log space so
sweeps over depth/width/norm stay finite far beyond float64 range.

The moment bound is evaluated with moment power ``k-1`` by default;
``proof_variant=True`` selects power ``k`` instead (the two variants reflect
an off-by-one ambiguity in the bound's derivation; both are reported, never
test-enforced against data).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkSpec, Params
from .specfun import kummer_1f1_log


def layer_max_abs(params: Params) -> np.ndarray:
    """Per-layer max absolute weight (biases excluded)."""
    return np.array([float(np.max(np.abs(w))) for w in params.weights])


def _log_abs_moment(order: float, mu: float, sigma: float) -> float:
    """``log E|X|^order`` for ``X ~ N(mu, sigma^2)``."""
    if order == 0.0:
        return 0.0
    z = -(mu * mu) / (2.0 * sigma * sigma)
    return (
        order * math.log(sigma)
        + 0.5 * order * math.log(2.0)
        + math.lgamma((order + 1.0) / 2.0)
        - 0.5 * math.log(math.pi)
        + kummer_1f1_log(-order / 2.0, 0.5, z)
    )


def log_psi_star(k: int, mu: float, sigma: float) -> float:
    """``log [ sigma^{2(k-1)} * 1F1(-(k-1)/2, 1/2, -mu^2/(2 sigma^2))^2 ]``.

    This is the part of the moment bound that changes with the active-count
    distribution; ratios of it drive the distribution-based loss estimator.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if k < 1:
        raise ValueError(f"depth must be >= 1, got {k}")
    if k == 1:
        return 0.0
    z = -(mu * mu) / (2.0 * sigma * sigma)
    return 2.0 * (k - 1) * math.log(sigma) + 2.0 * kummer_1f1_log(-(k - 1) / 2.0, 0.5, z)


def psi_star(k: int, mu: float, sigma: float) -> float:
    return math.exp(log_psi_star(k, mu, sigma))


@dataclass(frozen=True)
class NormBound:
    """Weight-only bound; ``tight`` is None when some layer is all zeros."""

    tight: float | None
    loose: float
    log_tight: float | None
    log_loose: float
    components: dict

    def to_dict(self):
        return {
            "tight": self.tight,
            "loose": self.loose,
            "log_tight": self.log_tight,
            "log_loose": self.log_loose,
            "components": self.components,
        }


def norm_bound(params: Params) -> NormBound:
    """Input-independent sensitivity bound from layer norms and widths.

    ``loose = N_w * d_in * (N_max * w_max)^{2(k-1)}``;
    the tight form replaces ``w_max^{k-1}`` by the product of per-layer
    maxima divided by the smallest of them.  ``N_w`` counts weights only.
    """
    spec = params.spec
    k = spec.depth
    n_max = max(spec.hidden_sizes) if spec.hidden_sizes else 1
    per_layer = layer_max_abs(params)
    w_max = float(per_layer.max())
    base = math.log(spec.n_weights) + math.log(spec.d_in) + 2.0 * (k - 1) * math.log(n_max)
    components = {
        "n_weights": spec.n_weights,
        "d_in": spec.d_in,
        "depth": k,
        "n_max": n_max,
        "w_max": w_max,
        "w_max_per_layer": per_layer.tolist(),
    }
    if w_max == 0.0:
        log_loose = -math.inf if k > 1 else base
        return NormBound(None, math.exp(log_loose), None, log_loose, components)
    log_loose = base + 2.0 * (k - 1) * math.log(w_max)
    if np.any(per_layer == 0.0):
        log_tight = None
        tight = None
    else:
        logs = np.log(per_layer)
        log_tight = base + 2.0 * (float(logs.sum()) - float(logs.min()))
        tight = math.exp(log_tight)
    return NormBound(tight, math.exp(log_loose), log_tight, log_loose, components)


@dataclass(frozen=True)
class MomentBound:
    value: float
    log_value: float
    components: dict

    def to_dict(self):
        return {"value": self.value, "log_value": self.log_value, "components": self.components}


def moment_bound_from_parts(
    layer_sizes,
    w_max_per_layer,
    mu: float,
    sigma: float,
    proof_variant: bool = False,
) -> MomentBound:
    """Moment bound from raw ingredients (used directly by the sweep CLI)."""
    spec = NetworkSpec(tuple(layer_sizes), use_bias=False)
    k = spec.depth
    per_layer = np.asarray(w_max_per_layer, dtype=np.float64)
    if per_layer.shape != (k,):
        raise ValueError(f"need one w_max per layer: got {per_layer.shape}, depth {k}")
    if np.any(per_layer <= 0.0):
        raise ValueError("moment bound requires a positive max weight in every layer")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    power = float(k if proof_variant else k - 1)
    log_moment = _log_abs_moment(power, mu, sigma)
    log_value = (
        math.log(spec.n_weights)
        + math.log(spec.d_in)
        + 2.0 * log_moment
        - 2.0 * k * math.log(k)
        + 2.0 * float(np.sum(np.log(per_layer)))
    )
    z = -(mu * mu) / (2.0 * sigma * sigma)
    gamma_arg = (power + 1.0) / 2.0
    components = {
        "n_weights": spec.n_weights,
        "d_in": spec.d_in,
        "depth": k,
        "mu": mu,
        "sigma": sigma,
        "moment_power": power,
        "log_abs_moment": log_moment,
        "gamma_log": math.lgamma(gamma_arg),
        "psi_log": kummer_1f1_log(-power / 2.0, 0.5, z) if power > 0 else 0.0,
        "w_max_per_layer": per_layer.tolist(),
    }
    try:
        value = math.exp(log_value)
    except OverflowError:
        value = math.inf
    return MomentBound(value, log_value, components)


def moment_bound(params: Params, stats, proof_variant: bool = False) -> MomentBound:
    """Moment bound for fitted active-count statistics.

    ``stats`` is anything with ``mu``/``sigma`` attributes (normally an
    :class:`~tansens.region_stats.ActiveNodeStats`).
    """
    return moment_bound_from_parts(
        params.spec.layer_sizes,
        layer_max_abs(params),
        float(stats.mu),
        float(stats.sigma),
        proof_variant=proof_variant,
    )


def hoeffding_tail(epsilon: float, T: int, sens_max_f: float) -> float:
    """Concentration diagnostic ``exp(-eps^2 T / (2 sens_max_f^2))``.

    Bounds the probability that a ``T``-sample mean of per-sample
    Frobenius-squared sensitivities misses the population value by more than
    ``epsilon``; ``sens_max_f`` is the max per-sample value on the dataset.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if T < 1:
        raise ValueError("need at least one sample")
    if sens_max_f <= 0.0:
        raise ValueError("sens_max_f must be positive")
    return math.exp(-0.5 * epsilon * epsilon * T / (sens_max_f * sens_max_f))


def max_region_count(spec: NetworkSpec) -> int:
    """Upper bound on the number of distinct activation regions.

    ``prod_i floor(n_i / d_in)^{d_in}`` over hidden layers (exact integer
    arithmetic; the underlying counting argument assumes a single output).
    Zero signals that the formula's wide-regime assumption fails.
    """
    if spec.d_in < 1:
        raise ValueError("d_in must be >= 1")
    total = 1
    for n in spec.hidden_sizes:
        total *= (n // spec.d_in) ** spec.d_in
    return total


def bound_report(params: Params, stats=None, proof_variant_too: bool = True) -> dict:
    """All bound values and components as one JSON-ready dictionary."""
    report = {"norm_bound": norm_bound(params).to_dict()}
    if stats is not None:
        report["moment_bound"] = moment_bound(params, stats).to_dict()
        if proof_variant_too:
            report["moment_bound_proof_variant"] = moment_bound(
                params, stats, proof_variant=True
            ).to_dict()
    return report


def write_bound_report(params: Params, stats, path) -> None:
    with open(path, "w") as f:
        json.dump(bound_report(params, stats), f, indent=2)
        f.write("\n")
