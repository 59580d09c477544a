"""Dataset ingestion: CIFAR-10 binary batches, MNIST IDX files, synthetic data.

Image pixels are scaled to [0, 1] by dividing by 255 (no mean subtraction,
no augmentation).  Loaders never download anything; ``official_urls`` tells
the user where to fetch the archives.  Image datasets are stored float32 to
halve memory, synthetic data float64; all arithmetic upstream is float64.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

CIFAR_DIM = 3072
CIFAR_RECORD = 1 + CIFAR_DIM
MNIST_DIM = 784
IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, d_in)
    labels: np.ndarray  # (n,) class indices
    name: str = ""
    split: str = ""

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs must be (n, d), labels (n,)")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels disagree on sample count")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def d_in(self):
        return self.inputs.shape[1]

    def as_tuple(self):
        return self.inputs, self.labels


def official_urls() -> dict:
    """Where to download the supported archives (never fetched automatically)."""
    return {
        "cifar10": "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
        "mnist": "http://yann.lecun.com/exdb/mnist/",
    }


def _read_cifar_file(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0 or len(raw) % CIFAR_RECORD != 0:
        raise IOError(
            f"{path}: size {len(raw)} is not a multiple of the {CIFAR_RECORD}-byte "
            f"record (truncated at offset {len(raw) - len(raw) % CIFAR_RECORD})"
        )
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max(initial=0) > 9:
        raise IOError(f"{path}: label byte > 9 found")
    pixels = rec[:, 1:].astype(np.float32) / np.float32(255.0)
    return pixels, labels


def load_cifar10(directory):
    """Load the binary CIFAR-10 batches: 50000 train / 10000 test samples."""
    train_x, train_y = [], []
    for i in range(1, 6):
        path = os.path.join(directory, f"data_batch_{i}.bin")
        if not os.path.exists(path):
            raise IOError(f"missing CIFAR-10 batch: {path}")
        x, y = _read_cifar_file(path)
        train_x.append(x)
        train_y.append(y)
    test_path = os.path.join(directory, "test_batch.bin")
    if not os.path.exists(test_path):
        raise IOError(f"missing CIFAR-10 batch: {test_path}")
    te_x, te_y = _read_cifar_file(test_path)
    train = Dataset(np.concatenate(train_x), np.concatenate(train_y), "cifar10", "train")
    test = Dataset(te_x, te_y, "cifar10", "test")
    return train, test


def _read_idx(path, expected_magic):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8:
        raise IOError(f"{path}: too short for an IDX header")
    magic, count = struct.unpack_from(">II", raw, 0)
    if magic != expected_magic:
        raise IOError(f"{path}: IDX magic {magic}, expected {expected_magic}")
    if expected_magic == IDX_IMAGE_MAGIC:
        rows, cols = struct.unpack_from(">II", raw, 8)
        data = np.frombuffer(raw, dtype=np.uint8, offset=16)
        if data.size != count * rows * cols:
            raise IOError(f"{path}: expected {count * rows * cols} pixels, found {data.size}")
        return data.reshape(count, rows * cols)
    data = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if data.size != count:
        raise IOError(f"{path}: expected {count} labels, found {data.size}")
    return data


def load_mnist(directory):
    """Load the IDX-format MNIST files (60000 train / 10000 test samples)."""
    names = {
        "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
        "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
        "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
        "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
    }

    def find(key):
        for cand in names[key]:
            path = os.path.join(directory, cand)
            if os.path.exists(path):
                return path
        raise IOError(f"missing MNIST file {names[key][0]} in {directory}")

    def build(split, img_key, lab_key):
        images = _read_idx(find(img_key), IDX_IMAGE_MAGIC)
        labels = _read_idx(find(lab_key), IDX_LABEL_MAGIC).astype(np.int64)
        if images.shape[0] != labels.shape[0]:
            raise IOError("MNIST image/label counts disagree")
        inputs = images.astype(np.float32) / np.float32(255.0)
        return Dataset(inputs, labels, "mnist", split)

    return build("train", "train_images", "train_labels"), build(
        "test", "test_images", "test_labels"
    )


def synthetic_gaussian(
    d_in: int, classes: int, n: int, seed: int, means_seed=None, mean_scale: float = 1.0
) -> Dataset:
    """Class-conditional unit-covariance Gaussians with fixed random means.

    Means are drawn from ``mean_scale * N(0, I)`` using ``means_seed``
    (defaults to ``seed``), so several splits of the same task share one
    ``means_seed`` while varying ``seed``.  Deterministic throughout.
    """
    if n < classes:
        raise ValueError("need at least one sample per class")
    means_rng = np.random.default_rng(seed if means_seed is None else means_seed)
    means = mean_scale * means_rng.standard_normal((classes, d_in))
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes  # balanced where divisible
    inputs = means[labels] + rng.standard_normal((n, d_in))
    return Dataset(inputs, labels.astype(np.int64), "synthetic", "")


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic stratified subsample preserving class proportions.

    Per-class quotas use largest-remainder rounding, so balanced datasets
    with ``n`` divisible by the class count stay exactly balanced.
    """
    if n > len(ds):
        raise ValueError(f"cannot take {n} samples from {len(ds)}")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(ds.labels, return_counts=True)
    exact = counts * (n / len(ds))
    quotas = np.floor(exact).astype(np.int64)
    remainder = n - quotas.sum()
    if remainder > 0:
        order = np.argsort(-(exact - quotas), kind="stable")
        quotas[order[:remainder]] += 1
    keep = []
    for cls, quota in zip(classes, quotas):
        idx = np.flatnonzero(ds.labels == cls)
        keep.append(rng.permutation(idx)[:quota])
    keep = np.sort(np.concatenate(keep))
    return Dataset(ds.inputs[keep], ds.labels[keep], ds.name, ds.split)
