"""Parameter sweeps of the moment bound, emitted as plot-ready CSV.

The preset reproduces the qualitative bound-versus-{mean, variance, norm,
width, depth} panels: a 1000-wide network with per-layer max weight 0.1 and
active-count statistics pinned to the reference 4x100 network's fitted
values (mu = 0.48 N = 192, sigma = 0.04 N = 16 for N = 400 hidden neurons).
Holding mu and sigma fixed while sweeping depth is what produces the
rise-then-fall depth profile; values are reported in log space as well,
since the bound spans hundreds of orders of magnitude.
"""

from __future__ import annotations

import os

import numpy as np

from .bounds import moment_bound_from_parts

PRESET_BASE = {
    "d_in": 3072,
    "d_out": 10,
    "width": 1000,
    "depth": 5,  # weight layers; 4 hidden layers of `width` neurons
    "w_max": 0.1,
    "mu": 192.0,
    "sigma": 16.0,
}

PRESET_RANGES = {
    "mu": np.linspace(40.0, 400.0, 19),
    "sigma": np.linspace(4.0, 64.0, 16),
    "w_max": np.geomspace(0.01, 1.0, 17),
    "width": np.linspace(100, 4000, 14),
    "depth": np.arange(1, 26),
}

SWEEPABLE = tuple(PRESET_RANGES)


def sweep_moment_bound(param: str, values, base=None):
    """Evaluate the moment bound along one swept parameter.

    Returns ``(param, value, bound, log_bound)`` rows; ``base`` overrides the
    preset's fixed settings.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {SWEEPABLE}")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty sweep range")
    cfg = dict(PRESET_BASE)
    if base:
        cfg.update(base)
    rows = []
    for value in values:
        point = dict(cfg)
        point[param] = float(value)
        depth = int(point["depth"])
        width = int(point["width"])
        layer_sizes = [int(point["d_in"])] + [width] * (depth - 1) + [int(point["d_out"])]
        mb = moment_bound_from_parts(
            layer_sizes,
            [point["w_max"]] * depth,
            point["mu"],
            point["sigma"],
        )
        rows.append((param, float(value), mb.value, mb.log_value))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w") as f:
        f.write("param,value,moment_bound,log_moment_bound\n")
        for param, value, bound, log_bound in rows:
            f.write(f"{param},{value!r},{bound!r},{log_bound!r}\n")


def read_sweep_csv(path):
    values, logs = [], []
    with open(path) as f:
        next(f)
        for line in f:
            _, value, _, log_bound = line.rstrip("\n").split(",")
            values.append(float(value))
            logs.append(float(log_bound))
    return np.asarray(values), np.asarray(logs)


def preset_sweeps(out_dir) -> dict:
    """Emit one CSV per preset panel; returns parameter -> path."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for param, values in PRESET_RANGES.items():
        rows = sweep_moment_bound(param, values)
        path = os.path.join(out_dir, f"sweep_{param}.csv")
        write_sweep_csv(rows, path)
        paths[param] = path
    return paths
