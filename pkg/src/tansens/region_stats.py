"""Activation-region statistics over datasets.

Covers the distribution of active-neuron counts, soft region-membership
probabilities (products of sigmoids of preactivations), the empirical
tangent sensitivity (a membership-weighted mixture of per-region Frobenius
norms), per-neuron margins, and an in-region constancy check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .network import Params, forward, forward_batch, hidden_gates
from .sensitivity import tangent_sensitivity


def _logsigmoid(t):
    return -np.logaddexp(0.0, -np.asarray(t, dtype=np.float64))


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logsumexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


@dataclass(frozen=True)
class ActiveNodeStats:
    """Distribution of the active-neuron count T(x) over a dataset."""

    counts: np.ndarray  # per-sample T(x)
    per_layer_counts: np.ndarray  # (n_samples, n_hidden_layers)
    mu: float
    sigma: float  # population (ddof=0) standard deviation
    hist_counts: np.ndarray
    hist_edges: np.ndarray


def active_node_stats(params: Params, X, bins="fd") -> ActiveNodeStats:
    """Per-sample active counts with moment fits and a histogram.

    ``bins`` is forwarded to ``numpy.histogram`` (Freedman-Diaconis by
    default; pass an int for fixed-width binning).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty (n, d_in) dataset")
    gates = hidden_gates(params, X)
    offsets = params.spec.hidden_offsets()
    per_layer = np.add.reduceat(gates, offsets[:-1], axis=1).astype(np.int64)
    counts = per_layer.sum(axis=1)
    hist_counts, hist_edges = np.histogram(counts, bins=bins)
    return ActiveNodeStats(
        counts=counts,
        per_layer_counts=per_layer,
        mu=float(counts.mean()),
        sigma=float(counts.std()),
        hist_counts=hist_counts,
        hist_edges=hist_edges,
    )


@dataclass(frozen=True)
class RegionProbability:
    pattern: np.ndarray
    log_prob: float


def pattern_log_probability(params: Params, x, pattern) -> RegionProbability:
    """Soft membership probability of ``x`` in the region of ``pattern``.

    ``log p = sum_{a_l=+1} log sigmoid(h_l) + sum_{a_l=-1} log sigmoid(-h_l)``,
    evaluated entirely in log space (safe for |h| up to ~1e4 and beyond).
    """
    pattern = np.asarray(pattern, dtype=np.int8)
    spec = params.spec
    if pattern.shape != (spec.n_hidden,):
        raise ValueError(f"pattern has shape {pattern.shape}, expected ({spec.n_hidden},)")
    if not np.all(np.abs(pattern) == 1):
        raise ValueError("pattern entries must be +-1")
    trace = forward(params, x)
    h = np.concatenate(trace.preactivations) if trace.preactivations else np.zeros(0)
    log_prob = float(np.sum(_logsigmoid(np.where(pattern == 1, h, -h))))
    return RegionProbability(pattern, log_prob)


def pattern_bitstring(pattern) -> str:
    """'1'/'0' encoding of a +-1 pattern, layer-major."""
    return "".join("1" if s == 1 else "0" for s in np.asarray(pattern))


def _unique_gate_rows(gates):
    """Indices of first occurrence of each distinct gate row."""
    packed = np.packbits(gates, axis=1)
    view = np.ascontiguousarray(packed).view(
        np.dtype((np.void, packed.shape[1]))
    ).ravel()
    _, first = np.unique(view, return_index=True)
    return np.sort(first)


def _pattern_mixture_log_weights(hidden_pre, bits, chunk=512):
    """``log mean_x p(A_i | x)`` for each pattern row of ``bits``.

    ``hidden_pre`` is the (n_samples, N) preactivation matrix; ``bits`` holds
    0/1 pattern rows.  Computed with one matmul per chunk plus log-sum-exp,
    so no probability ever leaves log space.
    """
    log_pos = _logsigmoid(hidden_pre)
    log_neg = _logsigmoid(-hidden_pre)
    base = log_neg.sum(axis=1)
    delta = log_pos - log_neg
    n_samples = hidden_pre.shape[0]
    out = np.empty(bits.shape[0])
    for s0 in range(0, bits.shape[0], chunk):
        s1 = min(s0 + chunk, bits.shape[0])
        logp = bits[s0:s1].astype(np.float64) @ delta.T + base[None, :]
        out[s0:s1] = _logsumexp(logp, axis=1) - np.log(n_samples)
    return out


def empirical_tangent_sensitivity(
    params: Params, X, normalized: bool = True, return_details: bool = False
):
    """Membership-weighted mean of per-region Frobenius-squared sensitivity.

    The region set is the one realized by ``X``; each region's sensitivity is
    that of any representative sample (constant inside a region), and its
    weight is the ``X``-averaged soft membership probability, renormalized
    over the realized regions unless ``normalized=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty (n, d_in) dataset")
    preacts, _ = forward_batch(params, X)
    hidden_pre = (
        np.concatenate(preacts, axis=1) if preacts else np.zeros((X.shape[0], 0))
    )
    gates = (hidden_pre > 0.0).astype(np.uint8)
    rep = _unique_gate_rows(gates)
    bits = gates[rep]
    sens = kernels.frob_sq_gates(params, bits)
    log_pbar = _pattern_mixture_log_weights(hidden_pre, bits)
    if normalized:
        weights = np.exp(log_pbar - _logsumexp(log_pbar))
    else:
        weights = np.exp(log_pbar)
    value = float(weights @ sens)
    if return_details:
        return value, {
            "patterns": bits,
            "log_mean_membership": log_pbar,
            "weights": weights,
            "region_sensitivity": sens,
        }
    return value


@dataclass(frozen=True)
class ConstancyReport:
    """Outcome of perturbing an input inside its activation region."""

    trials: int
    in_region: int
    in_region_fraction: float
    max_abs_diff: float
    conclusive: bool


def region_constancy_check(
    params: Params, x, trials: int = 100, radius: float = 1e-3, seed: int = 0
) -> ConstancyReport:
    """Empirically confirm that sensitivity is constant on the region of ``x``.

    Draws ``trials`` perturbations uniform in the radius ball, keeps those
    that preserve the activation pattern, and reports the largest entrywise
    deviation of their sensitivity from the base point's.  Zero in-region
    perturbations make the report inconclusive rather than an error.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    spec = params.spec
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    base_pattern = forward(params, x).pattern
    dense = spec.n_weights * spec.d_in <= 2_000_000
    if dense:
        base_val = tangent_sensitivity(params, x)
    else:
        base_val = kernels.frob_sq_gates(params, (base_pattern == 1).astype(np.uint8)[None, :])
    in_region = 0
    max_diff = 0.0
    for _ in range(trials):
        v = rng.standard_normal(spec.d_in)
        v *= radius * rng.uniform() ** (1.0 / spec.d_in) / np.linalg.norm(v)
        x2 = x + v
        if not np.array_equal(forward(params, x2).pattern, base_pattern):
            continue
        in_region += 1
        if dense:
            diff = float(np.max(np.abs(tangent_sensitivity(params, x2) - base_val)))
        else:
            gates2 = (forward(params, x2).pattern == 1).astype(np.uint8)[None, :]
            diff = float(np.max(np.abs(kernels.frob_sq_gates(params, gates2) - base_val)))
        max_diff = max(max_diff, diff)
    return ConstancyReport(
        trials=trials,
        in_region=in_region,
        in_region_fraction=in_region / trials if trials else 0.0,
        max_abs_diff=max_diff,
        conclusive=in_region > 0,
    )


def neuron_margins(params: Params, X):
    """Per-neuron margins over a dataset.

    Returns ``(rho, rho_hat)``: the minimum absolute preactivation of each
    hidden neuron, and the minimum distance of its sigmoid from 1/2.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty (n, d_in) dataset")
    preacts, _ = forward_batch(params, X)
    h = np.concatenate(preacts, axis=1) if preacts else np.zeros((X.shape[0], 0))
    rho = np.min(np.abs(h), axis=0)
    rho_hat = np.min(np.abs(_sigmoid(h) - 0.5), axis=0)
    return rho, rho_hat


def export_margins_csv(params: Params, X, path) -> None:
    rho, rho_hat = neuron_margins(params, X)
    offsets = params.spec.hidden_offsets()
    layer_of = np.searchsorted(offsets, np.arange(len(rho)), side="right")
    with open(path, "w") as f:
        f.write("neuron,layer,index_in_layer,rho,rho_hat\n")
        for n, (r, rh) in enumerate(zip(rho, rho_hat)):
            layer = int(layer_of[n])
            f.write(f"{n},{layer},{n - offsets[layer - 1]},{r!r},{rh!r}\n")


def export_active_histograms(params: Params, X_train, X_test, path, bins="fd") -> None:
    """Train/test overlay histograms of T(x), total and per layer, as CSV."""
    tr = active_node_stats(params, X_train, bins=bins)
    te = active_node_stats(params, X_test, bins=bins)
    rows = []

    def overlay(name, a, b):
        edges = np.histogram_bin_edges(np.concatenate([a, b]), bins=bins)
        ca, _ = np.histogram(a, bins=edges)
        cb, _ = np.histogram(b, bins=edges)
        for i in range(len(edges) - 1):
            rows.append((name, edges[i], edges[i + 1], int(ca[i]), int(cb[i])))

    overlay("total", tr.counts, te.counts)
    for j in range(tr.per_layer_counts.shape[1]):
        overlay(f"layer{j + 1}", tr.per_layer_counts[:, j], te.per_layer_counts[:, j])
    with open(path, "w") as f:
        f.write("scope,bin_left,bin_right,train_count,test_count\n")
        for name, lo, hi, a, b in rows:
            f.write(f"{name},{lo!r},{hi!r},{a},{b}\n")
