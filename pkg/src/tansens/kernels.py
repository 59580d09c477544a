"""Backend selection and shared plumbing for the batch sensitivity kernels.

The compiled extension is preferred when importable; setting the environment
variable ``TANSENS_PURE_PYTHON=1`` (before import) forces the NumPy fallback.
Both backends implement the same ``frob_sq_batch`` contract and agree to
floating-point roundoff.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py, network

if os.environ.get("TANSENS_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _sens_core as _impl
    except ImportError:
        _impl = _kernels_py

HAVE_COMPILED = _impl.__name__.endswith("_sens_core")
BACKEND = "compiled" if HAVE_COMPILED else "numpy"


def padded_tail_weights(params):
    """Stack ``W_2 .. W_k`` into one zero-padded (H, maxw, maxn) array."""
    spec = params.spec
    H = len(spec.hidden_sizes)
    maxw = max(spec.hidden_sizes)
    maxn = max(list(spec.hidden_sizes[1:]) + [spec.d_out])
    wpad = np.zeros((H, maxw, maxn))
    for j in range(H):
        W = params.weights[j + 1]
        wpad[j, : W.shape[0], : W.shape[1]] = W
    return wpad


def frob_sq_gates(params, gates) -> np.ndarray:
    """Per-sample ``||S||_F^2`` given precomputed hidden gates (n, N) uint8.

    Sensitivity is constant on an activation region, so gates are the only
    per-sample information the kernel needs.
    """
    spec = params.spec
    gates = np.ascontiguousarray(gates, dtype=np.uint8)
    if gates.ndim != 2 or gates.shape[1] != spec.n_hidden:
        raise ValueError(f"gates have shape {gates.shape}, expected (n, {spec.n_hidden})")
    if spec.depth == 1:
        # no hidden layers: every weight row is a unit indicator row
        return np.full(gates.shape[0], float(spec.d_in * spec.d_out))
    W1 = params.weights[0]
    gram1 = np.ascontiguousarray(W1.T @ W1)
    wpad = padded_tail_weights(params)
    widths = np.asarray(spec.hidden_sizes, dtype=np.int64)
    return np.asarray(
        _impl.frob_sq_batch(gram1, wpad, widths, gates, spec.d_in, spec.d_out)
    )


def frob_sq_dataset(params, X) -> np.ndarray:
    """Per-sample ``||S||_F^2`` over a dataset (one batched forward pass)."""
    return frob_sq_gates(params, network.hidden_gates(params, X))
