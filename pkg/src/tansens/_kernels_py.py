"""NumPy fallback for the batch sensitivity kernel.

Same contract as the compiled ``_sens_core`` module: given the first-layer
Gram matrix, the padded stack of remaining weight matrices and the per-sample
hidden gates, return each sample's Frobenius-squared tangent sensitivity.
Works on whole sample chunks with batched matmuls; gate sparsity is applied
as dense masks.
"""

from __future__ import annotations

import numpy as np


def frob_sq_batch(gram1, wpad, hidden_widths, gates, d_in, d_out, chunk=256):
    """Per-sample ``||S||_F^2`` from gates alone.

    ``wpad[j]`` holds the weight matrix leaving hidden layer ``j`` (shapes
    padded to a common size); ``gates`` is ``(n_samples, N)`` uint8 in
    layer-major order.  The per-layer contribution is
    ``tr(M_{m-1}) * ||delta_m||^2`` where ``M`` is the gated Gram chain of
    the input Jacobians and ``delta`` the gated backward products.
    """
    hidden_widths = np.asarray(hidden_widths, dtype=np.int64)
    H = len(hidden_widths)
    n_samples = gates.shape[0]
    offs = np.concatenate([[0], np.cumsum(hidden_widths)])
    diag1 = np.ascontiguousarray(np.diag(gram1))
    out = np.empty(n_samples)
    for s0 in range(0, n_samples, chunk):
        s1 = min(s0 + chunk, n_samples)
        C = s1 - s0
        g = [
            gates[s0:s1, offs[j] : offs[j + 1]].astype(np.float64)
            for j in range(H)
        ]
        # backward: delta_j = g_j * (delta_{j+1} @ W_out(j)^T)
        sqd = [None] * H
        nxt = np.ones((C, d_out))
        for j in range(H - 1, -1, -1):
            ncols = hidden_widths[j + 1] if j + 1 < H else d_out
            W = wpad[j, : hidden_widths[j], :ncols]
            nxt = g[j] * (nxt @ W.T)
            sqd[j] = np.einsum("cv,cv->c", nxt, nxt)
        total = d_in * sqd[0]
        tr = g[0] @ diag1
        total += tr * (sqd[1] if H >= 2 else float(d_out))
        if H >= 2:
            M = gram1[None, :, :] * g[0][:, :, None] * g[0][:, None, :]
            for j in range(1, H):
                W = wpad[j - 1, : hidden_widths[j - 1], : hidden_widths[j]]
                M = np.matmul(W.T, np.matmul(M, W))
                M *= g[j][:, :, None]
                M *= g[j][:, None, :]
                tr = np.einsum("cvv->c", M)
                total += tr * (sqd[j + 1] if j + 1 < H else float(d_out))
        out[s0:s1] = total
    return out
