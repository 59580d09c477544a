"""Shared test utilities: random networks and interior-point sampling."""

import numpy as np

from tansens.network import NetworkSpec, Params, min_boundary_distance


def random_sizes(rng, max_hidden_layers=3, max_width=5, max_io=4):
    n_hidden = int(rng.integers(1, max_hidden_layers + 1))
    return (
        int(rng.integers(1, max_io + 1)),
        *(int(rng.integers(1, max_width + 1)) for _ in range(n_hidden)),
        int(rng.integers(1, max_io + 1)),
    )


def random_net(rng, sizes=None, use_bias=True, scale=1.0):
    if sizes is None:
        sizes = random_sizes(rng)
    spec = NetworkSpec(tuple(sizes), use_bias=use_bias)
    weights = tuple(
        scale * rng.standard_normal((a, b))
        for a, b in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:])
    )
    if use_bias:
        biases = tuple(scale * 0.3 * rng.standard_normal(n) for n in spec.layer_sizes[1:])
    else:
        biases = tuple(np.zeros(n) for n in spec.layer_sizes[1:])
    return Params(spec, weights, biases)


def interior_input(rng, params, margin=1e-3, tries=200):
    """An input at distance > margin from every activation-region wall."""
    for _ in range(tries):
        x = rng.standard_normal(params.spec.d_in)
        if min_boundary_distance(params, x) > margin:
            return x
    raise RuntimeError("could not sample an interior point; loosen the margin")


def all_active_net(rng, sizes):
    """Positive weights/biases: every neuron active on positive inputs."""
    spec = NetworkSpec(tuple(sizes), use_bias=True)
    weights = tuple(
        rng.uniform(0.1, 1.0, size=(a, b))
        for a, b in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:])
    )
    biases = tuple(rng.uniform(0.1, 0.5, size=n) for n in spec.layer_sizes[1:])
    return Params(spec, weights, biases)
