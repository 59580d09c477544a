"""Fully-connected ReLU networks with full forward-pass introspection.

Conventions used throughout the package:

* Weight matrices are stored source-by-target: ``weights[i]`` has shape
  ``(layer_sizes[i], layer_sizes[i+1])`` and the next layer's preactivation
  is ``a @ weights[i] + biases[i]``.
* Hidden neurons are indexed globally in layer-major order (all of layer 1,
  then all of layer 2, ...); the output layer has no ReLU and no gates.
* A neuron with preactivation exactly 0 counts as inactive (sign -1),
  matching a ReLU subgradient of 0 at the kink.
* All arithmetic is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"RNCKPT01"


@dataclass(frozen=True)
class NetworkSpec:
    """Layer sizes ``[d_in, N_1, ..., N_{k-1}, d_out]`` plus bias switch."""

    layer_sizes: tuple
    use_bias: bool = True

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(n < 1 for n in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def d_in(self):
        return self.layer_sizes[0]

    @property
    def d_out(self):
        return self.layer_sizes[-1]

    @property
    def depth(self):
        """Number of weight matrices k."""
        return len(self.layer_sizes) - 1

    @property
    def hidden_sizes(self):
        return self.layer_sizes[1:-1]

    @property
    def n_hidden(self):
        """Total number of hidden (gated) neurons N."""
        return sum(self.hidden_sizes)

    @property
    def n_weights(self):
        return sum(a * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def n_params(self):
        n = self.n_weights
        if self.use_bias:
            n += sum(self.layer_sizes[1:])
        return n

    def hidden_offsets(self):
        """Start offset of each hidden layer in the global neuron order."""
        return np.concatenate([[0], np.cumsum(self.hidden_sizes)]).astype(np.int64)


@dataclass(frozen=True)
class Params:
    """Weight/bias arrays for a :class:`NetworkSpec`.

    Treated as immutable: every update produces a new instance, so analysis
    code may safely share a ``Params`` across workers.
    """

    spec: NetworkSpec
    weights: tuple
    biases: tuple

    def __post_init__(self):
        ws = tuple(np.ascontiguousarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.ascontiguousarray(b, dtype=np.float64) for b in self.biases)
        sizes = self.spec.layer_sizes
        if len(ws) != self.spec.depth or len(bs) != self.spec.depth:
            raise ValueError("expected one weight and one bias block per layer")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (sizes[i], sizes[i + 1]):
                raise ValueError(
                    f"weight {i} has shape {w.shape}, expected {(sizes[i], sizes[i + 1])}"
                )
            if b.shape != (sizes[i + 1],):
                raise ValueError(f"bias {i} has shape {b.shape}, expected ({sizes[i + 1]},)")
        if not self.spec.use_bias and any(np.any(b != 0.0) for b in bs):
            raise ValueError("biasless spec but nonzero bias values")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)


def zero_bias_params(spec: NetworkSpec, weights) -> Params:
    """Wrap weight matrices with all-zero biases."""
    biases = tuple(np.zeros(n) for n in spec.layer_sizes[1:])
    return Params(spec, tuple(weights), biases)


@dataclass(frozen=True)
class ForwardTrace:
    """Everything recorded during one forward evaluation."""

    input: np.ndarray
    preactivations: tuple  # one vector per hidden layer
    activations: tuple  # ReLU of the above
    output: np.ndarray
    pattern: np.ndarray  # global +-1 signs, layer-major, int8


def forward(params: Params, x) -> ForwardTrace:
    """Evaluate the network at ``x`` and record all intermediate state."""
    spec = params.spec
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.d_in,):
        raise ValueError(f"input has shape {x.shape}, expected ({spec.d_in},)")
    pre, act = [], []
    a = x
    for i in range(spec.depth - 1):
        h = a @ params.weights[i] + params.biases[i]
        a = np.maximum(h, 0.0)
        pre.append(h)
        act.append(a)
    out = a @ params.weights[-1] + params.biases[-1]
    if pre:
        pattern = np.where(np.concatenate(pre) > 0.0, 1, -1).astype(np.int8)
    else:
        pattern = np.zeros(0, dtype=np.int8)
    return ForwardTrace(x, tuple(pre), tuple(act), out, pattern)


def activation_pattern(trace: ForwardTrace):
    """Sign vector of the trace plus per-layer active counts ``n_i``."""
    counts = np.array([int(np.count_nonzero(h > 0.0)) for h in trace.preactivations])
    return trace.pattern, counts


def forward_batch(params: Params, X):
    """Batched forward pass: hidden preactivations per layer and the logits.

    Returns ``(preacts, logits)`` where ``preacts[i]`` has shape
    ``(n_samples, N_{i+1})``.  Inputs are upcast to float64.
    """
    spec = params.spec
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.d_in:
        raise ValueError(f"dataset has shape {X.shape}, expected (n, {spec.d_in})")
    preacts = []
    a = X
    for i in range(spec.depth - 1):
        h = a @ params.weights[i] + params.biases[i]
        preacts.append(h)
        a = np.maximum(h, 0.0)
    logits = a @ params.weights[-1] + params.biases[-1]
    return preacts, logits


def hidden_gates(params: Params, X) -> np.ndarray:
    """Active/inactive mask of every hidden neuron, shape ``(n, N)``, uint8."""
    preacts, _ = forward_batch(params, X)
    if not preacts:
        return np.zeros((np.asarray(X).shape[0], 0), dtype=np.uint8)
    return (np.concatenate([h > 0.0 for h in preacts], axis=1)).astype(np.uint8)


def forward_jacobian(params: Params, x):
    """Jacobians of each hidden layer's activations w.r.t. the input.

    Under the activation pattern frozen at ``x``, ``J[i]`` (shape
    ``(N_{i+1}, d_in)``) is ``D_{i+1} W_{i+1}^T J[i-1]`` with ``J[-1]`` the
    identity and ``D`` the 0/1 gate diagonal.
    """
    trace = forward(params, x)
    jacs = []
    J = np.eye(params.spec.d_in)
    for i, h in enumerate(trace.preactivations):
        J = params.weights[i].T @ J
        J = J * (h > 0.0)[:, None]
        jacs.append(J)
    return jacs


def min_boundary_distance(params: Params, x) -> float:
    """Distance heuristic from ``x`` to the nearest activation-region wall.

    Uses ``min_l |h_l(x)| / ||grad_x h_l(x)||``; neurons whose preactivation
    gradient vanishes (unreachable through the frozen gates) are skipped.
    Returns ``inf`` for networks without hidden layers.
    """
    trace = forward(params, x)
    if not trace.preactivations:
        return np.inf
    dist = np.inf
    J = np.eye(params.spec.d_in)
    for i, h in enumerate(trace.preactivations):
        P = params.weights[i].T @ J  # preactivation Jacobian of layer i+1
        norms = np.linalg.norm(P, axis=1)
        live = norms > 0.0
        if np.any(live):
            dist = min(dist, float(np.min(np.abs(h[live]) / norms[live])))
        J = P * (h > 0.0)[:, None]
    return dist


def parameter_gradient(params: Params, x, include_bias: bool = False) -> np.ndarray:
    """Gradient of ``sum_l f_l(x)`` w.r.t. the parameters, as a flat vector.

    Row order matches the sensitivity-matrix convention: per layer, weight
    entries in (source, target) order, then (with ``include_bias``) that
    layer's bias entries.
    """
    spec = params.spec
    trace = forward(params, x)
    acts = (trace.input,) + trace.activations
    # delta[m] = d(sum_l f_l)/d(preactivation of layer m+1)
    deltas = [None] * spec.depth
    d = np.ones(spec.d_out)
    deltas[spec.depth - 1] = d
    for m in range(spec.depth - 2, -1, -1):
        d = params.weights[m + 1] @ d
        d = d * (trace.preactivations[m] > 0.0)
        deltas[m] = d
    blocks = []
    for m in range(spec.depth):
        blocks.append(np.outer(acts[m], deltas[m]).ravel())
        if include_bias:
            blocks.append(deltas[m].copy())
    return np.concatenate(blocks)


def save_params(params: Params, path) -> None:
    """Write a versioned binary checkpoint (magic, sizes, weights, biases)."""
    spec = params.spec
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<B3x", 1 if spec.use_bias else 0))
        f.write(struct.pack("<I", len(spec.layer_sizes)))
        f.write(struct.pack(f"<{len(spec.layer_sizes)}I", *spec.layer_sizes))
        for w in params.weights:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        if spec.use_bias:
            for b in params.biases:
                f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path) -> Params:
    """Read a checkpoint produced by :func:`save_params`."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}, expected {CHECKPOINT_MAGIC!r}")
    use_bias = bool(raw[8])
    (n_sizes,) = struct.unpack_from("<I", raw, 12)
    sizes = struct.unpack_from(f"<{n_sizes}I", raw, 16)
    spec = NetworkSpec(sizes, use_bias=use_bias)
    off = 16 + 4 * n_sizes
    weights, biases = [], []
    for i in range(spec.depth):
        n = sizes[i] * sizes[i + 1]
        block = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
        if block.size != n:
            raise ValueError(f"{path}: truncated weight block {i} at offset {off}")
        weights.append(block.reshape(sizes[i], sizes[i + 1]).copy())
        off += 8 * n
    if use_bias:
        for i in range(spec.depth):
            n = sizes[i + 1]
            block = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
            if block.size != n:
                raise ValueError(f"{path}: truncated bias block {i} at offset {off}")
            biases.append(block.copy())
            off += 8 * n
    else:
        biases = [np.zeros(sizes[i + 1]) for i in range(spec.depth)]
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes after offset {off}")
    return Params(spec, tuple(weights), tuple(biases))
