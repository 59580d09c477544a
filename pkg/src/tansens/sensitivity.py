"""Tangent sensitivity matrices: exact layerwise algorithm plus two oracles.

The tangent sensitivity of a network at input ``x`` is the matrix of mixed
second derivatives d²f/dθ dx (summed over output coordinates by default).
Rows are indexed by weight parameter in (layer, source, target) order,
columns by input coordinate.  Inside an activation region every entry for a
layer-``m`` weight (u, v) factors as ``J[m-1][u, i] * delta[m][v]`` with
``J`` the gated input Jacobians and ``delta`` the gated backward products,
which is what the layerwise algorithm exploits; the path-enumeration oracle
instead sums, per weight, the products of the other weights along every
gate-active input-output path through it.

Bias rows are identically zero inside a region and excluded by default;
``include_bias=True`` inserts the zero rows to restore full-parameter shape.
"""

from __future__ import annotations

import itertools
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .network import Params, forward, forward_jacobian, min_boundary_distance, parameter_gradient

SENSITIVITY_MAGIC = b"SENSMAT1"

# Refuse to materialize matrices beyond this many entries (norms and dataset
# statistics remain available through the streaming kernels).
MAX_DENSE_ENTRIES = 50_000_000


def weight_row_labels(spec, include_bias: bool = False):
    """Row labels as tuples: ("w", layer, source, target) / ("b", layer, target).

    Layers are 1-based to match the usual w_{m,u,v} reading.
    """
    labels = []
    sizes = spec.layer_sizes
    for m in range(spec.depth):
        for u in range(sizes[m]):
            for v in range(sizes[m + 1]):
                labels.append(("w", m + 1, u, v))
        if include_bias and spec.use_bias:
            for v in range(sizes[m + 1]):
                labels.append(("b", m + 1, v))
    return labels


def _check_dense_size(spec, include_bias):
    rows = spec.n_params if include_bias else spec.n_weights
    if rows * spec.d_in > MAX_DENSE_ENTRIES:
        raise ValueError(
            f"dense sensitivity matrix would hold {rows * spec.d_in} entries "
            f"(> {MAX_DENSE_ENTRIES}); use the dataset statistics API instead"
        )


def _gated_deltas(params: Params, trace):
    """Backward products delta[m] (summed over outputs), one per weight layer."""
    spec = params.spec
    deltas = [None] * spec.depth
    d = np.ones(spec.d_out)
    deltas[spec.depth - 1] = d
    for m in range(spec.depth - 2, -1, -1):
        d = params.weights[m + 1] @ d
        d = d * (trace.preactivations[m] > 0.0)
        deltas[m] = d
    return deltas


def tangent_sensitivity(params: Params, x, include_bias: bool = False) -> np.ndarray:
    """Exact tangent sensitivity at ``x`` by the layerwise algorithm.

    Cost is one forward plus one backward sweep per input column; paths are
    never enumerated.  Points with a preactivation exactly 0 are evaluated
    with the inactive-gate convention (they sit on a region boundary).
    """
    spec = params.spec
    _check_dense_size(spec, include_bias)
    trace = forward(params, x)
    deltas = _gated_deltas(params, trace)
    jacs = [np.eye(spec.d_in)] + forward_jacobian(params, x)
    blocks = []
    for m in range(spec.depth):
        # rows (u, v) of layer m+1: J[m][u, :] * delta[m][v]
        block = jacs[m][:, None, :] * deltas[m][None, :, None]
        blocks.append(block.reshape(-1, spec.d_in))
        if include_bias and spec.use_bias:
            blocks.append(np.zeros((spec.layer_sizes[m + 1], spec.d_in)))
    return np.concatenate(blocks, axis=0)


def tangent_sensitivity_per_output(params: Params, x) -> np.ndarray:
    """Per-output variant, shape ``(n_weights, d_in, d_out)``.

    Summing over the last axis reproduces :func:`tangent_sensitivity`.
    """
    spec = params.spec
    if spec.n_weights * spec.d_in * spec.d_out > MAX_DENSE_ENTRIES:
        raise ValueError("per-output tensor too large to materialize")
    trace = forward(params, x)
    # B[m]: gated backward products to each output, shape (N_{m+1}, d_out)
    B = [None] * spec.depth
    btail = np.eye(spec.d_out)
    B[spec.depth - 1] = btail
    for m in range(spec.depth - 2, -1, -1):
        btail = params.weights[m + 1] @ btail
        btail = btail * (trace.preactivations[m] > 0.0)[:, None]
        B[m] = btail
    jacs = [np.eye(spec.d_in)] + forward_jacobian(params, x)
    blocks = []
    for m in range(spec.depth):
        block = jacs[m][:, None, :, None] * B[m][None, :, None, :]
        blocks.append(block.reshape(-1, spec.d_in, spec.d_out))
    return np.concatenate(blocks, axis=0)


def path_count(spec) -> int:
    """Number of input-output paths: d_in * prod(hidden sizes) * d_out."""
    n = spec.d_in * spec.d_out
    for h in spec.hidden_sizes:
        n *= h
    return n


def path_enumeration_sensitivity(params: Params, x, cap: int = 10**7) -> np.ndarray:
    """Brute-force oracle: accumulate path products over gate-active paths.

    A path is kept iff every intermediate hidden neuron it visits has a
    strictly positive preactivation at ``x``; for each weight on a kept path
    the product of the remaining weights is added to that weight's row at
    the path's input column.  Intended for validation on small networks.
    """
    spec = params.spec
    n_paths = path_count(spec)
    if n_paths > cap:
        raise ValueError(f"{n_paths} paths exceed the enumeration cap of {cap}")
    _check_dense_size(spec, include_bias=False)
    trace = forward(params, x)
    gates = [h > 0.0 for h in trace.preactivations]
    sizes = spec.layer_sizes
    k = spec.depth
    row_offset = np.concatenate(
        [[0], np.cumsum([sizes[m] * sizes[m + 1] for m in range(k)])]
    )
    S = np.zeros((spec.n_weights, spec.d_in))
    w = params.weights
    for hidden in itertools.product(*(range(n) for n in spec.hidden_sizes)):
        if not all(g[j] for g, j in zip(gates, hidden)):
            continue
        for i in range(spec.d_in):
            for out in range(spec.d_out):
                nodes = (i,) + hidden + (out,)
                path_w = [w[m][nodes[m], nodes[m + 1]] for m in range(k)]
                # product of the other weights via prefix/suffix products
                pre = [1.0] * (k + 1)
                for m in range(k):
                    pre[m + 1] = pre[m] * path_w[m]
                suf = [1.0] * (k + 1)
                for m in range(k - 1, -1, -1):
                    suf[m] = suf[m + 1] * path_w[m]
                for m in range(k):
                    row = row_offset[m] + nodes[m] * sizes[m + 1] + nodes[m + 1]
                    S[row, i] += pre[m] * suf[m + 1]
    return S


def finite_difference_sensitivity(
    params: Params, x, h: float = 1e-4, include_bias: bool = False
) -> np.ndarray:
    """Central differences of the parameter gradient w.r.t. each input coordinate.

    Exact up to rounding inside an activation region (the gradient is locally
    constant in ``theta``-blocks and linear pieces meet only at region
    walls).  Emits a ``RuntimeWarning`` when ``x`` sits within ``h`` of a
    wall, where steps may cross into a different region.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    spec = params.spec
    _check_dense_size(spec, include_bias)
    if min_boundary_distance(params, x) <= h:
        warnings.warn(
            "input is within one step of an activation-region boundary; "
            "finite differences may straddle regions",
            RuntimeWarning,
            stacklevel=2,
        )
    x = np.asarray(x, dtype=np.float64)
    rows = spec.n_params if include_bias and spec.use_bias else spec.n_weights
    S = np.empty((rows, spec.d_in))
    for i in range(spec.d_in):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        gp = parameter_gradient(params, xp, include_bias=include_bias)
        gm = parameter_gradient(params, xm, include_bias=include_bias)
        S[:, i] = (gp - gm) / (2.0 * h)
    return S


def frobenius_sq(S) -> float:
    """Sum of squared entries."""
    S = np.asarray(S)
    return float(np.sum(S * S))


@dataclass(frozen=True)
class FrobeniusStats:
    """Dataset-level Frobenius-squared statistics of tangent sensitivity."""

    mean: float
    max: float
    per_sample: np.ndarray


def mean_frobenius_sq(params: Params, X) -> FrobeniusStats:
    """Mean and max of per-sample ``||S||_F^2`` over a dataset.

    Streams through the batch kernels; the dense matrices are never formed.
    """
    from . import kernels  # local import: kernels pulls in the compiled core

    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty (n, d_in) dataset")
    per_sample = kernels.frob_sq_dataset(params, X)
    return FrobeniusStats(float(per_sample.mean()), float(per_sample.max()), per_sample)


def export_sensitivity_csv(S, spec, path, include_bias: bool = False) -> None:
    """CSV export with one labeled row per parameter."""
    S = np.asarray(S)
    labels = weight_row_labels(spec, include_bias=include_bias)
    if len(labels) != S.shape[0]:
        raise ValueError(f"matrix has {S.shape[0]} rows but spec yields {len(labels)} labels")
    with open(path, "w") as f:
        cols = ",".join(f"x{i}" for i in range(S.shape[1]))
        f.write(f"kind,layer,source,target,{cols}\n")
        for label, row in zip(labels, S):
            if label[0] == "w":
                _, m, u, v = label
                head = f"w,{m},{u},{v}"
            else:
                _, m, v = label
                head = f"b,{m},,{v}"
            f.write(head + "," + ",".join(repr(val) for val in row) + "\n")


def save_sensitivity(S, path) -> None:
    """Compact binary export: magic, uint32 shape, float64 entries."""
    S = np.ascontiguousarray(S, dtype="<f8")
    with open(path, "wb") as f:
        f.write(SENSITIVITY_MAGIC)
        f.write(struct.pack("<II", S.shape[0], S.shape[1]))
        f.write(S.tobytes())


def load_sensitivity(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != SENSITIVITY_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    rows, cols = struct.unpack_from("<II", raw, 8)
    data = np.frombuffer(raw, dtype="<f8", offset=16)
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols).copy()
