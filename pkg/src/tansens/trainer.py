"""From-scratch training: cross-entropy, backprop, SGD/Adam with weight decay.

The reference path is single-threaded and fully deterministic: identical
(seed, config, data) reproduce bit-identical parameter trajectories.
Shuffling uses a fresh generator seeded by (seed, epoch); the ReLU
subgradient at 0 is 0, matching the inactive-gate convention elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkSpec, Params


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    learning_rate: float = 0.05
    weight_decay: float = 0.0005
    seed: int = 0
    shuffle: bool = True
    optimizer: str = "sgd"  # "sgd" (reference) or "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def init_params(spec: NetworkSpec, seed: int) -> Params:
    """Uniform init: layer i entries ~ U(-sqrt(1/N_{i-1}), sqrt(1/N_{i-1}))."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    sizes = spec.layer_sizes
    for i in range(spec.depth):
        bound = np.sqrt(1.0 / sizes[i])
        weights.append(rng.uniform(-bound, bound, size=(sizes[i], sizes[i + 1])))
        if spec.use_bias:
            biases.append(rng.uniform(-bound, bound, size=sizes[i + 1]))
        else:
            biases.append(np.zeros(sizes[i + 1]))
    return Params(spec, tuple(weights), tuple(biases))


def _log_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def cross_entropy(logits, label: int) -> float:
    """``-log softmax(logits)[label]`` with log-sum-exp stabilization."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} out of range for {logits.shape[-1]} classes")
    return float(-_log_softmax(logits)[label])


def cross_entropy_batch(logits, labels) -> np.ndarray:
    """Per-sample cross-entropy for a (n, d_out) logit matrix."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    ls = _log_softmax(logits)
    return -ls[np.arange(len(labels)), labels]


def _forward_full(params: Params, X):
    acts = [np.asarray(X, dtype=np.float64)]
    pre = []
    a = acts[0]
    for i in range(params.spec.depth - 1):
        h = a @ params.weights[i] + params.biases[i]
        a = np.maximum(h, 0.0)
        pre.append(h)
        acts.append(a)
    logits = a @ params.weights[-1] + params.biases[-1]
    return acts, pre, logits


def batch_gradient(params: Params, X, y):
    """Mean-loss gradients by backprop: ``(grads_w, grads_b, mean_loss)``."""
    spec = params.spec
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    acts, pre, logits = _forward_full(params, X)
    n = X.shape[0]
    probs = np.exp(_log_softmax(logits))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    loss = float(np.mean(cross_entropy_batch(logits, y)))
    grads_w = [None] * spec.depth
    grads_b = [None] * spec.depth
    for m in range(spec.depth - 1, -1, -1):
        grads_w[m] = acts[m].T @ delta
        grads_b[m] = delta.sum(axis=0)
        if m > 0:
            delta = (delta @ params.weights[m].T) * (pre[m - 1] > 0.0)
    return grads_w, grads_b, loss


def _decayed(grads_w, grads_b, params, cfg):
    if cfg.weight_decay == 0.0:
        return grads_w, grads_b
    gw = [g + cfg.weight_decay * w for g, w in zip(grads_w, params.weights)]
    if params.spec.use_bias:
        gb = [g + cfg.weight_decay * b for g, b in zip(grads_b, params.biases)]
    else:
        gb = grads_b
    return gw, gb


def _check_finite(grads_w, grads_b, step):
    for g in list(grads_w) + list(grads_b):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at step {step}")


def sgd_step(params: Params, batch, cfg: TrainConfig, step: int = 0) -> Params:
    """One SGD update ``theta <- theta - lr * (grad + wd * theta)``."""
    X, y = batch
    grads_w, grads_b, _ = batch_gradient(params, X, y)
    grads_w, grads_b = _decayed(grads_w, grads_b, params, cfg)
    _check_finite(grads_w, grads_b, step)
    lr = cfg.learning_rate
    new_w = tuple(w - lr * g for w, g in zip(params.weights, grads_w))
    if params.spec.use_bias:
        new_b = tuple(b - lr * g for b, g in zip(params.biases, grads_b))
    else:
        new_b = params.biases
    return Params(params.spec, new_w, new_b)


@dataclass
class AdamState:
    t: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)


def adam_step(params: Params, batch, cfg: TrainConfig, state: AdamState, step: int = 0):
    X, y = batch
    grads_w, grads_b, _ = batch_gradient(params, X, y)
    grads_w, grads_b = _decayed(grads_w, grads_b, params, cfg)
    _check_finite(grads_w, grads_b, step)
    if state.t == 0:
        state.m_w = [np.zeros_like(w) for w in params.weights]
        state.v_w = [np.zeros_like(w) for w in params.weights]
        state.m_b = [np.zeros_like(b) for b in params.biases]
        state.v_b = [np.zeros_like(b) for b in params.biases]
    state.t += 1
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    new_w, new_b = [], []
    for i in range(params.spec.depth):
        state.m_w[i] = b1 * state.m_w[i] + (1 - b1) * grads_w[i]
        state.v_w[i] = b2 * state.v_w[i] + (1 - b2) * grads_w[i] ** 2
        new_w.append(
            params.weights[i] - lr * (state.m_w[i] / c1) / (np.sqrt(state.v_w[i] / c2) + eps)
        )
        if params.spec.use_bias:
            state.m_b[i] = b1 * state.m_b[i] + (1 - b1) * grads_b[i]
            state.v_b[i] = b2 * state.v_b[i] + (1 - b2) * grads_b[i] ** 2
            new_b.append(
                params.biases[i] - lr * (state.m_b[i] / c1) / (np.sqrt(state.v_b[i] / c2) + eps)
            )
        else:
            new_b.append(params.biases[i])
    return Params(params.spec, tuple(new_w), tuple(new_b)), state


def evaluate(params: Params, X, y):
    """Mean cross-entropy and accuracy on a labeled set."""
    from .network import forward_batch

    _, logits = forward_batch(params, X)
    loss = float(np.mean(cross_entropy_batch(logits, np.asarray(y))))
    acc = float(np.mean(np.argmax(logits, axis=1) == np.asarray(y)))
    return loss, acc


@dataclass
class TrainResult:
    checkpoints: list  # Params per epoch, index 0 = initialization
    metrics: list  # dict per epoch (1-based), full-train and test figures


def train(spec: NetworkSpec, train_data, test_data, cfg: TrainConfig, hooks=()) -> TrainResult:
    """Minibatch training with per-epoch evaluation on both sets.

    ``train_data``/``test_data`` are ``(X, y)`` pairs.  Each epoch appends a
    checkpoint and a metrics row; ``hooks`` are called as
    ``hook(epoch, params, metrics_row)`` after each evaluation.
    ``epochs=0`` returns just the initial checkpoint.
    """
    X_tr, y_tr = train_data
    X_te, y_te = test_data
    X_tr = np.asarray(X_tr, dtype=np.float64)
    X_te = np.asarray(X_te, dtype=np.float64)
    if X_tr.shape[0] == 0 or X_te.shape[0] == 0:
        raise ValueError("datasets must be nonempty")
    params = init_params(spec, cfg.seed)
    checkpoints = [params]
    metrics = []
    state = AdamState()
    n = X_tr.shape[0]
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        if cfg.shuffle:
            order = np.random.default_rng((cfg.seed, epoch)).permutation(n)
        else:
            order = np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = (X_tr[idx], y_tr[idx])
            if cfg.optimizer == "sgd":
                params = sgd_step(params, batch, cfg, step)
            else:
                params, state = adam_step(params, batch, cfg, state, step)
            step += 1
        train_loss, train_acc = evaluate(params, X_tr, y_tr)
        test_loss, test_acc = evaluate(params, X_te, y_te)
        row = {
            "epoch": epoch,
            "train_loss": train_loss,
            "train_acc": train_acc,
            "test_loss": test_loss,
            "test_acc": test_acc,
        }
        metrics.append(row)
        checkpoints.append(params)
        for hook in hooks:
            hook(epoch, params, row)
    return TrainResult(checkpoints, metrics)
